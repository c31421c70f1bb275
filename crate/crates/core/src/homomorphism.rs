//! Query homomorphisms and CQ containment.
//!
//! `q ⊆ q'` holds iff there is a homomorphism from `q'` to `q`: a map on
//! terms fixing the target and every constant that sends each atom of `q'`
//! onto an atom of `q`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::csp::{Problem, Structure};
use crate::error::Result;
use crate::kg::Direction;
use crate::query::{Atom, ConjunctiveQuery, Term};

/// A witness mapping from the terms of a source query to the terms of a
/// destination query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Homomorphism {
    mapping: BTreeMap<Term, Term>,
}

impl Homomorphism {
    pub fn from_mapping(mapping: BTreeMap<Term, Term>) -> Self {
        Homomorphism { mapping }
    }

    pub fn get(&self, term: &Term) -> Option<&Term> {
        self.mapping.get(term)
    }

    pub fn mapping(&self) -> &BTreeMap<Term, Term> {
        &self.mapping
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Term, &Term)> {
        self.mapping.iter()
    }

    /// Checks the mapping atom by atom against both queries.
    pub fn verify(&self, source: &ConjunctiveQuery, dest: &ConjunctiveQuery) -> Result<bool> {
        verify_mapping(source, dest, &self.mapping)
    }
}

/// Direct check that `mapping` is a homomorphism from `source` to `dest`.
pub fn verify_mapping(source: &ConjunctiveQuery, dest: &ConjunctiveQuery, mapping: &BTreeMap<Term, Term>) -> Result<bool> {
    let src = source.pure_atoms()?;
    let dst = dest.pure_atoms()?;
    if mapping.get(&source.target_term()) != Some(&dest.target_term()) {
        return Ok(false);
    }
    let dest_atoms: BTreeSet<(&str, &Term, &Term)> = dst
        .iter()
        .map(|a| (a.relation.as_str(), &a.subject, &a.object))
        .collect();
    for a in src {
        let (Some(s), Some(o)) = (mapping.get(&a.subject), mapping.get(&a.object)) else {
            return Ok(false);
        };
        for (t, img) in [(&a.subject, s), (&a.object, o)] {
            if t.is_const() && t != img {
                return Ok(false);
            }
        }
        if !dest_atoms.contains(&(a.relation.as_str(), s, o)) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A pure CQ indexed as a labeled structure over its terms.
pub(crate) struct QueryStructure {
    pub terms: Vec<Term>,
    pub term_index: BTreeMap<Term, usize>,
    pub relation_index: BTreeMap<String, usize>,
    fwd: Vec<BTreeMap<usize, Vec<usize>>>,
    bwd: Vec<BTreeMap<usize, Vec<usize>>>,
}

impl QueryStructure {
    pub fn new(target: &Term, atoms: &[Atom]) -> Self {
        let mut terms = alloc::vec![target.clone()];
        let mut term_index = BTreeMap::new();
        term_index.insert(target.clone(), 0);
        let mut relation_index = BTreeMap::new();
        let mut fwd: Vec<BTreeMap<usize, Vec<usize>>> = Vec::new();
        let mut bwd: Vec<BTreeMap<usize, Vec<usize>>> = Vec::new();
        for a in atoms {
            let mut idx = |t: &Term| {
                *term_index.entry(t.clone()).or_insert_with(|| {
                    terms.push(t.clone());
                    terms.len() - 1
                })
            };
            let s = idx(&a.subject);
            let o = idx(&a.object);
            let next = relation_index.len();
            let r = *relation_index.entry(a.relation.clone()).or_insert(next);
            if r == fwd.len() {
                fwd.push(BTreeMap::new());
                bwd.push(BTreeMap::new());
            }
            fwd[r].entry(s).or_default().push(o);
            bwd[r].entry(o).or_default().push(s);
        }
        for m in fwd.iter_mut().chain(bwd.iter_mut()) {
            for list in m.values_mut() {
                list.sort_unstable();
                list.dedup();
            }
        }
        QueryStructure {
            terms,
            term_index,
            relation_index,
            fwd,
            bwd,
        }
    }
}

impl Structure for QueryStructure {
    fn size(&self) -> usize {
        self.terms.len()
    }

    fn neighbors(&self, rel: usize, elem: usize, dir: Direction) -> impl Iterator<Item = usize> + '_ {
        let map = match dir {
            Direction::Forward => &self.fwd[rel],
            Direction::Backward => &self.bwd[rel],
        };
        map.get(&elem).into_iter().flatten().copied()
    }
}

/// Searches for a homomorphism from `source` into `dest`.
///
/// The search is complete: `None` means no homomorphism exists. A relation
/// of `source` absent from `dest` simply yields `None`.
pub fn find_homomorphism(source: &ConjunctiveQuery, dest: &ConjunctiveQuery) -> Result<Option<Homomorphism>> {
    let src = source.pure_atoms()?;
    let dst = dest.pure_atoms()?;
    let structure = QueryStructure::new(&dest.target_term(), dst);

    let src_index = QueryStructure::new(&source.target_term(), src);
    let n = src_index.terms.len();
    let mut problem = Problem::new(n, structure.size());
    problem.fix(0, 0);
    for (i, t) in src_index.terms.iter().enumerate() {
        if t.is_const() {
            match structure.term_index.get(t) {
                Some(&img) => problem.fix(i, img),
                None => return Ok(None),
            }
        }
    }
    for a in src {
        let Some(&rel) = structure.relation_index.get(&a.relation) else {
            return Ok(None);
        };
        problem.add_atom(rel, src_index.term_index[&a.subject], src_index.term_index[&a.object]);
    }

    Ok(problem.solve(&structure).map(|sol| {
        let mapping = src_index
            .terms
            .iter()
            .zip(sol)
            .map(|(t, img)| (t.clone(), structure.terms[img].clone()))
            .collect();
        Homomorphism { mapping }
    }))
}

/// `q ⊆ q'`, decided by a homomorphism from `q'` to `q`.
pub fn is_contained(q: &ConjunctiveQuery, q_prime: &ConjunctiveQuery) -> Result<bool> {
    Ok(find_homomorphism(q_prime, q)?.is_some())
}
