//! Seeded synthetic knowledge graphs with latent cluster structure.
//!
//! Entities fall into clusters, and clusters are paired by one random
//! matching. Each relation either stays inside a cluster or crosses to the
//! partner cluster, and is active on a random subset of pairs. A fraction
//! of edges is uniform noise. A diagonal bilinear model with at least as
//! many dimensions as clusters can represent the structure exactly.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::kg::{GraphBuilder, KnowledgeGraph, Triple};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthConfig {
    pub entities: usize,
    pub relations: usize,
    pub edges: usize,
    pub clusters: usize,
    /// Fraction of edges drawn uniformly at random.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            entities: 1000,
            relations: 20,
            edges: 10_000,
            clusters: 20,
            noise: 0.1,
            seed: 1,
        }
    }
}

/// A random involution on `0..n`: a random matching, unmatched points fixed.
fn involution(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut pi: Vec<usize> = (0..n).collect();
    for pair in order.chunks_exact(2) {
        pi[pair[0]] = pair[1];
        pi[pair[1]] = pair[0];
    }
    pi
}

pub fn cluster_graph(cfg: &SynthConfig) -> Result<KnowledgeGraph> {
    let (n, m, k) = (cfg.entities, cfg.relations, cfg.clusters);
    if n < 2 || m == 0 || k == 0 || k > n {
        return Err(Error::Argument("need 2+ entities, 1+ relations, 1..=entities clusters".into()));
    }
    if cfg.edges == 0 || cfg.edges > n * n * m / 4 {
        return Err(Error::Argument(format!("cannot place {} edges", cfg.edges)));
    }
    if !(0.0..=1.0).contains(&cfg.noise) {
        return Err(Error::Argument("noise must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0));
    let mut members: Vec<Vec<u32>> = alloc::vec![Vec::new(); k];
    for e in 0..n {
        members[e % k].push(e as u32);
    }
    let partner = involution(&mut rng, k);
    // per relation: whether it crosses to the partner, and its head clusters
    let mut layout: Vec<(bool, Vec<usize>)> = Vec::with_capacity(m);
    for _ in 0..m {
        let cross = rng.gen_bool(0.5);
        let mut active: Vec<usize> = (0..k).filter(|&c| c <= partner[c] && rng.gen_bool(0.5)).collect();
        if active.is_empty() {
            active.push(0);
        }
        let mut both: Vec<usize> = active.iter().flat_map(|&c| [c, partner[c]]).collect();
        both.sort_unstable();
        both.dedup();
        layout.push((cross, both));
    }

    let mut edges = BTreeSet::new();
    let max_attempts = cfg.edges * 100;
    let mut attempts = 0;
    while edges.len() < cfg.edges {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Exhausted {
                shape: "synthetic edges".into(),
                attempts: max_attempts,
            });
        }
        let r = rng.gen_range(0..m);
        let (cross, active) = &layout[r];
        let c = active[rng.gen_range(0..active.len())];
        let h = members[c][rng.gen_range(0..members[c].len())] as usize;
        let t = if rng.gen_bool(cfg.noise) {
            rng.gen_range(0..n) as u32
        } else {
            let target = &members[if *cross { partner[c] } else { c }];
            target[rng.gen_range(0..target.len())]
        };
        if t as usize == h {
            continue;
        }
        edges.insert(Triple::new(h as u32, r as u32, t));
    }

    let mut b = GraphBuilder::new();
    for e in 0..n {
        b.add_entity(&format!("e{e}"));
    }
    for r in 0..m {
        b.add_relation(&format!("r{r}"));
    }
    for t in edges {
        b.add_triple(t)?;
    }
    b.build()
}

/// Splits off `holdout` of the edges. Returns `(train, full)` over the same
/// dictionaries; `full` is the input graph.
pub fn split(g: &KnowledgeGraph, holdout: f64, seed: u64) -> Result<(KnowledgeGraph, KnowledgeGraph)> {
    if !(0.0..1.0).contains(&holdout) {
        return Err(Error::Argument(format!("holdout fraction {holdout} outside [0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
    let mut edges: Vec<Triple> = g.edges().to_vec();
    edges.shuffle(&mut rng);
    let cut = libm::round(edges.len() as f64 * holdout) as usize;
    let train = g.with_edges(edges[cut..].iter().copied())?;
    Ok((train, g.clone()))
}
