//! Backtracking search for homomorphisms from a set of binary atoms into a
//! labeled structure (another query, or a knowledge graph).
//!
//! Domains are bitsets over the structure's elements. Search maintains arc
//! consistency after every assignment and branches on the smallest open
//! domain, so tree-shaped inputs are solved without backtracking.

use alloc::vec::Vec;
use fixedbitset::FixedBitSet;

use crate::kg::Direction;

pub(crate) trait Structure {
    fn size(&self) -> usize;
    fn neighbors(&self, rel: usize, elem: usize, dir: Direction) -> impl Iterator<Item = usize> + '_;
}

#[derive(Clone, Copy, Debug)]
struct Constraint {
    rel: usize,
    subject: usize,
    object: usize,
}

pub(crate) struct Problem {
    domains: Vec<FixedBitSet>,
    constraints: Vec<Constraint>,
    incident: Vec<Vec<usize>>,
}

impl Problem {
    pub fn new(num_vars: usize, num_elems: usize) -> Self {
        let mut full = FixedBitSet::with_capacity(num_elems);
        full.insert_range(..);
        Problem {
            domains: alloc::vec![full; num_vars],
            constraints: Vec::new(),
            incident: alloc::vec![Vec::new(); num_vars],
        }
    }

    pub fn fix(&mut self, var: usize, elem: usize) {
        let d = &mut self.domains[var];
        let keep = d.contains(elem);
        d.clear();
        if keep {
            d.insert(elem);
        }
    }

    /// `rel(subject, object)` must map onto an edge of the structure.
    pub fn add_atom(&mut self, rel: usize, subject: usize, object: usize) {
        let idx = self.constraints.len();
        self.constraints.push(Constraint { rel, subject, object });
        self.incident[subject].push(idx);
        if subject != object {
            self.incident[object].push(idx);
        }
    }

    /// Applies self-loop filters and establishes arc consistency. Returns
    /// the domains, or `None` when some domain empties.
    pub fn initial_domains<S: Structure>(&self, s: &S) -> Option<Vec<FixedBitSet>> {
        let mut domains = self.domains.clone();
        for c in &self.constraints {
            if c.subject == c.object {
                let d = &domains[c.subject];
                let keep: Vec<usize> = d
                    .ones()
                    .filter(|&a| s.neighbors(c.rel, a, Direction::Forward).any(|b| b == a))
                    .collect();
                let d = &mut domains[c.subject];
                d.clear();
                for a in keep {
                    d.insert(a);
                }
            }
        }
        if domains.iter().any(FixedBitSet::is_clear) {
            return None;
        }
        let all: Vec<usize> = (0..self.constraints.len()).collect();
        if self.propagate(s, &mut domains, all) {
            Some(domains)
        } else {
            None
        }
    }

    fn revise<S: Structure>(s: &S, domains: &mut [FixedBitSet], var: usize, other: usize, rel: usize, dir: Direction) -> bool {
        let removed: Vec<usize> = domains[var]
            .ones()
            .filter(|&a| !s.neighbors(rel, a, dir).any(|b| domains[other].contains(b)))
            .collect();
        for &a in &removed {
            domains[var].set(a, false);
        }
        !removed.is_empty()
    }

    /// AC-3 over the given constraint queue.
    fn propagate<S: Structure>(&self, s: &S, domains: &mut [FixedBitSet], queue: Vec<usize>) -> bool {
        let mut queue = queue;
        let mut queued = FixedBitSet::with_capacity(self.constraints.len());
        for &c in &queue {
            queued.insert(c);
        }
        while let Some(ci) = queue.pop() {
            queued.set(ci, false);
            let c = self.constraints[ci];
            if c.subject == c.object {
                continue;
            }
            let mut changed = alloc::vec![];
            if Self::revise(s, domains, c.subject, c.object, c.rel, Direction::Forward) {
                changed.push(c.subject);
            }
            if Self::revise(s, domains, c.object, c.subject, c.rel, Direction::Backward) {
                changed.push(c.object);
            }
            for var in changed {
                if domains[var].is_clear() {
                    return false;
                }
                for &other in &self.incident[var] {
                    if other != ci && !queued.contains(other) {
                        queued.insert(other);
                        queue.push(other);
                    }
                }
            }
        }
        true
    }

    fn assign<S: Structure>(&self, s: &S, domains: &[FixedBitSet], var: usize, elem: usize) -> Option<Vec<FixedBitSet>> {
        let mut next = domains.to_vec();
        next[var].clear();
        next[var].insert(elem);
        if self.propagate(s, &mut next, self.incident[var].clone()) {
            Some(next)
        } else {
            None
        }
    }

    fn search<S: Structure>(&self, s: &S, domains: Vec<FixedBitSet>) -> Option<Vec<usize>> {
        let open = (0..domains.len())
            .filter(|&v| domains[v].count_ones(..) > 1)
            .min_by_key(|&v| (domains[v].count_ones(..), core::cmp::Reverse(self.incident[v].len()), v));
        let Some(var) = open else {
            return domains.iter().map(|d| d.minimum()).collect();
        };
        for elem in domains[var].ones() {
            if let Some(next) = self.assign(s, &domains, var, elem) {
                if let Some(sol) = self.search(s, next) {
                    return Some(sol);
                }
            }
        }
        None
    }

    /// Some satisfying assignment, one element per variable.
    pub fn solve<S: Structure>(&self, s: &S) -> Option<Vec<usize>> {
        let domains = self.initial_domains(s)?;
        self.search(s, domains)
    }

    /// All values of `var` that extend to a full solution, ascending. When
    /// the constraint graph is known to be a forest, arc consistency alone
    /// decides this.
    pub fn projections<S: Structure>(&self, s: &S, var: usize, forest: bool) -> Vec<usize> {
        let Some(domains) = self.initial_domains(s) else {
            return Vec::new();
        };
        if forest {
            return domains[var].ones().collect();
        }
        domains[var]
            .ones()
            .filter(|&e| {
                self.assign(s, &domains, var, e)
                    .and_then(|d| self.search(s, d))
                    .is_some()
            })
            .collect()
    }
}
