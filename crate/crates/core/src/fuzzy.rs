//! Fuzzy set execution of plans over a link predictor.
//!
//! Sets are `[0, 1]` vectors over entities. Anchors are one-hot, unanchored
//! leaves are the all-ones vector, projections push a set through the
//! predictor's scores, and the boolean connectives are a t-norm, t-conorm
//! and `1 - v`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::eval::AnswerSet;
use crate::kg::{Direction, EntityId, RelationId};
use crate::plan::{ExecutionPlan, PlanNode};
use crate::predictor::LinkPredictor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ProjectionMode {
    /// `w[b] = max_a v[a] * P(a, b)`
    #[default]
    MaxProduct,
    /// `w[b] = 1 - prod_a (1 - v[a] * P(a, b))`
    NoisyOr,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Conjunction {
    #[default]
    Product,
    Min,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Disjunction {
    #[default]
    ProbSum,
    Max,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FuzzyConfig {
    pub projection: ProjectionMode,
    pub conjunction: Conjunction,
    pub disjunction: Disjunction,
    /// Scores at or above this count as predicted answers.
    pub count_threshold: f64,
}

impl Default for FuzzyConfig {
    fn default() -> Self {
        FuzzyConfig {
            projection: ProjectionMode::MaxProduct,
            conjunction: Conjunction::Product,
            disjunction: Disjunction::ProbSum,
            count_threshold: 0.5,
        }
    }
}

impl FuzzyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.count_threshold > 0.0 && self.count_threshold < 1.0) {
            return Err(Error::Argument(format!(
                "count threshold {} outside (0, 1)",
                self.count_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FuzzyEntitySet {
    scores: Vec<f64>,
}

impl FuzzyEntitySet {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::Argument(format!("fuzzy score {s} outside [0, 1]")));
        }
        Ok(FuzzyEntitySet { scores })
    }

    pub fn zeros(n: usize) -> Self {
        FuzzyEntitySet {
            scores: alloc::vec![0.0; n],
        }
    }

    pub fn ones(n: usize) -> Self {
        FuzzyEntitySet {
            scores: alloc::vec![1.0; n],
        }
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn into_scores(self) -> Vec<f64> {
        self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Entities with a strictly positive score.
    pub fn support(&self) -> AnswerSet {
        self.scores
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > 0.0)
            .map(|(i, _)| EntityId(i as u32))
            .collect()
    }
}

/// Count of components at or above the configured threshold.
pub fn predicted_cardinality(v: &FuzzyEntitySet, cfg: &FuzzyConfig) -> usize {
    v.scores.iter().filter(|&&s| s >= cfg.count_threshold).count()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExecStats {
    /// Components pulled back into `[0, 1]` after an operator.
    pub clamped: usize,
    pub projections: usize,
}

pub fn execute<P: LinkPredictor + ?Sized>(plan: &ExecutionPlan, predictor: &P, cfg: &FuzzyConfig) -> Result<FuzzyEntitySet> {
    execute_with_stats(plan, predictor, cfg).map(|(v, _)| v)
}

pub fn execute_with_stats<P: LinkPredictor + ?Sized>(
    plan: &ExecutionPlan,
    predictor: &P,
    cfg: &FuzzyConfig,
) -> Result<(FuzzyEntitySet, ExecStats)> {
    let mut ex = Executor {
        p: predictor,
        cfg,
        n: predictor.num_entities(),
        stats: ExecStats::default(),
        buf: Vec::new(),
    };
    let scores = ex.node(&plan.root)?;
    Ok((FuzzyEntitySet { scores }, ex.stats))
}

struct Executor<'a, P: ?Sized> {
    p: &'a P,
    cfg: &'a FuzzyConfig,
    n: usize,
    stats: ExecStats,
    buf: Vec<f32>,
}

impl<P: LinkPredictor + ?Sized> Executor<'_, P> {
    fn clamp(&mut self, v: &mut [f64]) {
        for x in v.iter_mut() {
            if !(0.0..=1.0).contains(x) {
                *x = if *x > 1.0 { 1.0 } else { 0.0 };
                self.stats.clamped += 1;
            }
        }
    }

    fn node(&mut self, node: &PlanNode) -> Result<Vec<f64>> {
        let mut out = match node {
            PlanNode::Anchor(e) => {
                if e.index() >= self.n {
                    return Err(Error::Predictor(format!("entity {e} unknown to predictor")));
                }
                let mut v = alloc::vec![0.0; self.n];
                v[e.index()] = 1.0;
                v
            }
            PlanNode::ExistentialLeaf => alloc::vec![1.0; self.n],
            PlanNode::Projection {
                relation,
                direction,
                input,
            } => {
                if relation.index() >= self.p.num_relations() {
                    return Err(Error::Predictor(format!(
                        "relation {} unknown to predictor",
                        relation.0
                    )));
                }
                let v = self.node(input)?;
                self.stats.projections += 1;
                self.project(&v, *relation, *direction)
            }
            PlanNode::Intersection(children) => {
                let mut it = children.iter();
                let first = it.next().ok_or(Error::EmptyInput)?;
                let mut acc = self.node(first)?;
                for c in it {
                    let v = self.node(c)?;
                    for (a, b) in acc.iter_mut().zip(v) {
                        *a = match self.cfg.conjunction {
                            Conjunction::Product => *a * b,
                            Conjunction::Min => a.min(b),
                        };
                    }
                }
                acc
            }
            PlanNode::Union(children) => {
                let mut acc = alloc::vec![0.0; self.n];
                for c in children {
                    let v = self.node(c)?;
                    for (a, b) in acc.iter_mut().zip(v) {
                        *a = match self.cfg.disjunction {
                            Disjunction::ProbSum => *a + b - *a * b,
                            Disjunction::Max => a.max(b),
                        };
                    }
                }
                acc
            }
            PlanNode::Negation(c) => {
                let mut v = self.node(c)?;
                for x in v.iter_mut() {
                    *x = 1.0 - *x;
                }
                v
            }
        };
        self.clamp(&mut out);
        Ok(out)
    }

    fn project(&mut self, v: &[f64], rel: RelationId, dir: Direction) -> Vec<f64> {
        let n = self.n;
        let noisy = self.cfg.projection == ProjectionMode::NoisyOr;
        // max-product accumulates the max, noisy-or the product of misses
        let mut acc = alloc::vec![if noisy { 1.0 } else { 0.0 }; n];
        let push = |acc: &mut [f64], i: usize, x: f64| {
            if noisy {
                acc[i] *= 1.0 - x;
            } else if x > acc[i] {
                acc[i] = x;
            }
        };
        let active: Vec<usize> = (0..n).filter(|&a| v[a] > 0.0).collect();
        if n > 0 && self.p.crisp_neighbors(rel, EntityId(0), dir).is_some() {
            for &a in &active {
                let nbrs = self.p.crisp_neighbors(rel, EntityId(a as u32), dir).unwrap_or(&[]);
                for b in nbrs {
                    push(&mut acc, b.index(), v[a]);
                }
            }
        } else {
            match dir {
                Direction::Forward => {
                    for &a in &active {
                        let row = self.p.row(rel, EntityId(a as u32), &mut self.buf);
                        for (b, &s) in row.iter().enumerate() {
                            push(&mut acc, b, v[a] * s as f64);
                        }
                    }
                }
                Direction::Backward if active.len() * 8 < n => {
                    for &t in &active {
                        self.p.column(rel, EntityId(t as u32), &mut self.buf);
                        for (h, &s) in self.buf.iter().enumerate() {
                            push(&mut acc, h, v[t] * s as f64);
                        }
                    }
                }
                Direction::Backward => {
                    for h in 0..n {
                        let row = self.p.row(rel, EntityId(h as u32), &mut self.buf);
                        for &t in &active {
                            push(&mut acc, h, v[t] * row[t] as f64);
                        }
                    }
                }
            }
        }
        if noisy {
            for x in acc.iter_mut() {
                *x = 1.0 - *x;
            }
        }
        acc
    }
}
