//! Diagonal bilinear link predictor and its trainer.
//!
//! `score(h, r, t) = logistic(sum_i e_h[i] * w_r[i] * e_t[i])`, trained with
//! binary cross-entropy on observed triples and sampled corruptions.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::kg::{EntityId, KnowledgeGraph, RelationId, Triple};
use crate::predictor::LinkPredictor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Optimizer {
    Sgd,
    /// Adam with lazy updates: only rows touched by an example move.
    #[default]
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Corrupted triples drawn per observed triple.
    pub negatives: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Half-width of the uniform initialization.
    pub init_scale: f64,
    /// L2 penalty on the rows an example touches.
    pub l2: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 64,
            epochs: 50,
            learning_rate: 0.05,
            negatives: 4,
            seed: 7,
            optimizer: Optimizer::Adam,
            init_scale: 0.5,
            l2: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Argument("embedding dimension must be positive".into()));
        }
        if self.negatives == 0 {
            return Err(Error::Argument("need at least one negative per positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Argument(format!("bad learning rate {}", self.learning_rate)));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Argument(format!("bad init scale {}", self.init_scale)));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::Argument(format!("bad l2 penalty {}", self.l2)));
        }
        Ok(())
    }
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + libm::log1p(libm::exp(-x.abs()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BilinearModel {
    dim: usize,
    num_entities: usize,
    num_relations: usize,
    entities: Vec<f64>,
    relations: Vec<f64>,
}

/// Gradient of one example's loss, restricted to the rows it touches.
#[derive(Clone, Debug, PartialEq)]
pub struct ExampleGradient {
    /// One entry per distinct entity (head and tail merge when equal).
    pub entities: Vec<(EntityId, Vec<f64>)>,
    pub relation: (RelationId, Vec<f64>),
}

impl BilinearModel {
    /// Seeded uniform initialization in `[-init_scale, init_scale]`.
    pub fn init(num_entities: usize, num_relations: usize, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0));
        let s = cfg.init_scale;
        let entities = (0..num_entities * cfg.dim).map(|_| rng.gen_range(-s..=s)).collect();
        let relations = (0..num_relations * cfg.dim).map(|_| rng.gen_range(-s..=s)).collect();
        Ok(BilinearModel {
            dim: cfg.dim,
            num_entities,
            num_relations,
            entities,
            relations,
        })
    }

    /// Builds a model from row-major matrices.
    pub fn from_parts(dim: usize, entities: Vec<f64>, relations: Vec<f64>) -> Result<Self> {
        if dim == 0 || entities.len() % dim != 0 || relations.len() % dim != 0 {
            return Err(Error::Argument("matrix sizes are not multiples of the dimension".into()));
        }
        if entities.iter().chain(&relations).any(|x| !x.is_finite()) {
            return Err(Error::Argument("non-finite parameter".into()));
        }
        Ok(BilinearModel {
            dim,
            num_entities: entities.len() / dim,
            num_relations: relations.len() / dim,
            entities,
            relations,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entity_matrix(&self) -> &[f64] {
        &self.entities
    }

    pub fn relation_matrix(&self) -> &[f64] {
        &self.relations
    }

    pub fn entity(&self, e: EntityId) -> &[f64] {
        &self.entities[e.index() * self.dim..(e.index() + 1) * self.dim]
    }

    pub fn relation(&self, r: RelationId) -> &[f64] {
        &self.relations[r.index() * self.dim..(r.index() + 1) * self.dim]
    }

    fn entity_mut(&mut self, e: EntityId) -> &mut [f64] {
        &mut self.entities[e.index() * self.dim..(e.index() + 1) * self.dim]
    }

    fn relation_mut(&mut self, r: RelationId) -> &mut [f64] {
        &mut self.relations[r.index() * self.dim..(r.index() + 1) * self.dim]
    }

    fn check(&self, t: &Triple) -> Result<()> {
        for (kind, index, len) in [
            ("entity", t.head.index(), self.num_entities),
            ("entity", t.tail.index(), self.num_entities),
            ("relation", t.relation.index(), self.num_relations),
        ] {
            if index >= len {
                return Err(Error::IndexOutOfRange { kind, index, len });
            }
        }
        Ok(())
    }

    /// The bilinear form before squashing.
    pub fn raw_score(&self, t: &Triple) -> f64 {
        let (h, w, o) = (self.entity(t.head), self.relation(t.relation), self.entity(t.tail));
        (0..self.dim).map(|i| h[i] * w[i] * o[i]).sum()
    }

    pub fn probability(&self, t: &Triple) -> f64 {
        logistic(self.raw_score(t))
    }

    /// Binary cross-entropy of one example; `label` is 1 for observed.
    pub fn example_loss(&self, t: &Triple, label: bool) -> f64 {
        let s = self.raw_score(t);
        softplus(s) - if label { s } else { 0.0 }
    }

    pub fn example_gradient(&self, t: &Triple, label: bool) -> ExampleGradient {
        let g = logistic(self.raw_score(t)) - if label { 1.0 } else { 0.0 };
        let (h, w, o) = (self.entity(t.head), self.relation(t.relation), self.entity(t.tail));
        let gh: Vec<f64> = (0..self.dim).map(|i| g * w[i] * o[i]).collect();
        let gw: Vec<f64> = (0..self.dim).map(|i| g * h[i] * o[i]).collect();
        let go: Vec<f64> = (0..self.dim).map(|i| g * h[i] * w[i]).collect();
        let entities = if t.head == t.tail {
            alloc::vec![(t.head, gh.iter().zip(&go).map(|(a, b)| a + b).collect())]
        } else {
            alloc::vec![(t.head, gh), (t.tail, go)]
        };
        ExampleGradient {
            entities,
            relation: (t.relation, gw),
        }
    }
}

impl LinkPredictor for BilinearModel {
    fn num_entities(&self) -> usize {
        self.num_entities
    }

    fn num_relations(&self) -> usize {
        self.num_relations
    }

    fn score(&self, rel: RelationId, head: EntityId, tail: EntityId) -> f32 {
        self.probability(&Triple {
            head,
            relation: rel,
            tail,
        }) as f32
    }

    fn row<'a>(&'a self, rel: RelationId, head: EntityId, buf: &'a mut Vec<f32>) -> &'a [f32] {
        let (h, w) = (self.entity(head), self.relation(rel));
        let hw: Vec<f64> = h.iter().zip(w).map(|(a, b)| a * b).collect();
        buf.clear();
        buf.extend(self.entities.chunks_exact(self.dim).map(|e| {
            let s: f64 = hw.iter().zip(e).map(|(a, b)| a * b).sum();
            logistic(s) as f32
        }));
        buf
    }

    fn column(&self, rel: RelationId, tail: EntityId, buf: &mut Vec<f32>) {
        let (w, o) = (self.relation(rel), self.entity(tail));
        let wo: Vec<f64> = w.iter().zip(o).map(|(a, b)| a * b).collect();
        buf.clear();
        buf.extend(self.entities.chunks_exact(self.dim).map(|e| {
            let s: f64 = e.iter().zip(&wo).map(|(a, b)| a * b).sum();
            logistic(s) as f32
        }));
    }
}

/// Trained parameters plus the loss after every epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub model: BilinearModel,
    /// Mean loss on a fixed probe set (every observed triple and one
    /// corruption of each, drawn before training).
    pub loss_trace: Vec<f64>,
}

/// Replaces the head or the tail (even odds) by a different entity.
fn corrupt(rng: &mut ChaCha8Rng, t: &Triple, n: usize) -> Option<Triple> {
    if n < 2 {
        return None;
    }
    let mut out = *t;
    let slot = if rng.gen_bool(0.5) { &mut out.head } else { &mut out.tail };
    let old = slot.index();
    let mut e = rng.gen_range(0..n - 1);
    if e >= old {
        e += 1;
    }
    *slot = EntityId(e as u32);
    Some(out)
}

fn probe_loss(model: &BilinearModel, probe: &[(Triple, bool)]) -> f64 {
    let total: f64 = probe.iter().map(|(t, y)| model.example_loss(t, *y)).sum();
    total / probe.len() as f64
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

pub fn train(g: &KnowledgeGraph, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if g.num_edges() == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut model = BilinearModel::init(g.num_entities(), g.num_relations(), cfg)?;
    let n = g.num_entities();
    let edges = g.edges();

    let mut probe_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1));
    let mut probe: Vec<(Triple, bool)> = edges.iter().map(|t| (*t, true)).collect();
    for t in edges {
        if let Some(c) = corrupt(&mut probe_rng, t, n) {
            probe.push((c, false));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 2));
    let mut order: Vec<usize> = (0..edges.len()).collect();
    let mut ent_state = AdamState {
        m: alloc::vec![0.0; model.entities.len()],
        v: alloc::vec![0.0; model.entities.len()],
    };
    let mut rel_state = AdamState {
        m: alloc::vec![0.0; model.relations.len()],
        v: alloc::vec![0.0; model.relations.len()],
    };
    let mut step: i32 = 0;
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let pos = edges[i];
            let mut batch = alloc::vec![(pos, true)];
            for _ in 0..cfg.negatives {
                if let Some(c) = corrupt(&mut rng, &pos, n) {
                    batch.push((c, false));
                }
            }
            for (t, label) in batch {
                step = step.saturating_add(1);
                let grad = model.example_gradient(&t, label);
                let dim = model.dim;
                for (e, mut ge) in grad.entities {
                    let row = model.entity_mut(e);
                    for (gi, p) in ge.iter_mut().zip(row.iter()) {
                        *gi += cfg.l2 * p;
                    }
                    let off = e.index() * dim;
                    apply(cfg, step, row, &ge, &mut ent_state, off);
                }
                let (r, mut gr) = grad.relation;
                let row = model.relation_mut(r);
                for (gi, p) in gr.iter_mut().zip(row.iter()) {
                    *gi += cfg.l2 * p;
                }
                apply(cfg, step, row, &gr, &mut rel_state, r.index() * dim);
            }
        }
        let loss = probe_loss(&model, &probe);
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        trace.push(loss);
    }
    Ok(TrainOutcome {
        model,
        loss_trace: trace,
    })
}

fn apply(cfg: &TrainConfig, step: i32, row: &mut [f64], grad: &[f64], state: &mut AdamState, off: usize) {
    match cfg.optimizer {
        Optimizer::Sgd => {
            for (p, g) in row.iter_mut().zip(grad) {
                *p -= cfg.learning_rate * g;
            }
        }
        Optimizer::Adam => {
            let c1 = 1.0 - libm::pow(BETA1, step as f64);
            let c2 = 1.0 - libm::pow(BETA2, step as f64);
            for (i, (p, g)) in row.iter_mut().zip(grad).enumerate() {
                let m = &mut state.m[off + i];
                let v = &mut state.v[off + i];
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                *p -= cfg.learning_rate * (*m / c1) / (libm::sqrt(*v / c2) + ADAM_EPS);
            }
        }
    }
}

/// Largest relative gap between the analytic gradient of the example loss
/// (label 1 and label 0) and central finite differences, over every
/// parameter the triple touches.
pub fn gradient_check(model: &BilinearModel, t: &Triple, epsilon: f64) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::Argument(format!("epsilon {epsilon} outside [1e-7, 1e-3]")));
    }
    model.check(t)?;
    let mut worst: f64 = 0.0;
    let mut probe = model.clone();
    for label in [true, false] {
        let grad = model.example_gradient(t, label);
        let mut params: Vec<(bool, usize, f64)> = Vec::new();
        for (e, g) in &grad.entities {
            for (i, &gi) in g.iter().enumerate() {
                params.push((true, e.index() * model.dim + i, gi));
            }
        }
        let (r, g) = &grad.relation;
        for (i, &gi) in g.iter().enumerate() {
            params.push((false, r.index() * model.dim + i, gi));
        }
        for (is_entity, idx, analytic) in params {
            let orig = if is_entity { probe.entities[idx] } else { probe.relations[idx] };
            let set = |m: &mut BilinearModel, x: f64| {
                if is_entity {
                    m.entities[idx] = x;
                } else {
                    m.relations[idx] = x;
                }
            };
            set(&mut probe, orig + epsilon);
            let up = probe.example_loss(t, label);
            set(&mut probe, orig - epsilon);
            let down = probe.example_loss(t, label);
            set(&mut probe, orig);
            let numeric = (up - down) / (2.0 * epsilon);
            let denom = analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    Ok(worst)
}
