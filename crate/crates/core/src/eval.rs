//! Exact query answering over a knowledge graph.

use alloc::format;
use alloc::vec::Vec;
use fixedbitset::FixedBitSet;

use crate::csp::{Problem, Structure};
use crate::error::{Error, Result};
use crate::homomorphism::QueryStructure;
use crate::kg::{Direction, EntityId, KnowledgeGraph, RelationId};
use crate::plan::{compile_plan, ExecutionPlan, PlanNode};
use crate::query::{branch_graph, ConjunctiveQuery};

/// Sorted, duplicate-free set of entities.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct AnswerSet(Vec<EntityId>);

impl AnswerSet {
    pub fn new<I: IntoIterator<Item = EntityId>>(ids: I) -> Self {
        let mut v: Vec<EntityId> = ids.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        AnswerSet(v)
    }

    pub fn from_bitset(bits: &FixedBitSet) -> Self {
        AnswerSet(bits.ones().map(|i| EntityId(i as u32)).collect())
    }

    pub fn to_bitset(&self, num_entities: usize) -> FixedBitSet {
        let mut b = FixedBitSet::with_capacity(num_entities);
        for e in &self.0 {
            if e.index() < num_entities {
                b.insert(e.index());
            }
        }
        b
    }

    pub fn entities(&self) -> &[EntityId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, e: EntityId) -> bool {
        self.0.binary_search(&e).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.0.iter().copied()
    }

    pub fn is_subset(&self, other: &AnswerSet) -> bool {
        self.0.iter().all(|&e| other.contains(e))
    }

    pub fn union(&self, other: &AnswerSet) -> AnswerSet {
        AnswerSet::new(self.iter().chain(other.iter()))
    }

    pub fn difference(&self, other: &AnswerSet) -> AnswerSet {
        AnswerSet(self.iter().filter(|&e| !other.contains(e)).collect())
    }

    pub fn intersection(&self, other: &AnswerSet) -> AnswerSet {
        AnswerSet(self.iter().filter(|&e| other.contains(e)).collect())
    }
}

impl FromIterator<EntityId> for AnswerSet {
    fn from_iter<I: IntoIterator<Item = EntityId>>(iter: I) -> Self {
        AnswerSet::new(iter)
    }
}

struct GraphStructure<'a>(&'a KnowledgeGraph);

impl Structure for GraphStructure<'_> {
    fn size(&self) -> usize {
        self.0.num_entities()
    }

    fn neighbors(&self, rel: usize, elem: usize, dir: Direction) -> impl Iterator<Item = usize> + '_ {
        self.0
            .neighbors_unchecked(EntityId(elem as u32), RelationId(rel as u32), dir)
            .iter()
            .map(|e| e.index())
    }
}

/// `q(G)` for a pure CQ: every entity the target can take in some
/// satisfying assignment.
pub fn evaluate_cq(q: &ConjunctiveQuery, g: &KnowledgeGraph) -> Result<AnswerSet> {
    let atoms = q.pure_atoms()?;
    let terms = QueryStructure::new(&q.target_term(), atoms);
    let mut problem = Problem::new(terms.terms.len(), g.num_entities());
    for (i, t) in terms.terms.iter().enumerate() {
        if t.is_const() {
            let id = g
                .entity_id(t.name())
                .ok_or_else(|| Error::Binding(format!("unknown entity {}", t.name())))?;
            problem.fix(i, id.index());
        }
    }
    for a in atoms {
        let rel = g
            .relation_id(&a.relation)
            .ok_or_else(|| Error::Binding(format!("unknown relation {}", a.relation)))?;
        problem.add_atom(rel.index(), terms.term_index[&a.subject], terms.term_index[&a.object]);
    }
    // constants are pinned, so a forest query graph (constant occurrences
    // split apart) leaves an acyclic problem over the free variables
    let forest = branch_graph(&q.target, atoms).is_forest();
    let answers = problem.projections(&GraphStructure(g), 0, forest);
    Ok(AnswerSet(answers.into_iter().map(|i| EntityId(i as u32)).collect()))
}

/// Exact answers of any supported query: pure CQs of any shape, and
/// tree-like branches with unions and negation.
pub fn evaluate(q: &ConjunctiveQuery, g: &KnowledgeGraph) -> Result<AnswerSet> {
    if q.is_pure() {
        evaluate_cq(q, g)
    } else {
        evaluate_plan(q, g)
    }
}

/// Crisp evaluation of a query built from tree-like branches with unions
/// and negation. Negation is the complement within the entity set.
pub fn evaluate_plan(q: &ConjunctiveQuery, g: &KnowledgeGraph) -> Result<AnswerSet> {
    let plan = compile_plan(q, g)?;
    evaluate_compiled(&plan, g)
}

pub fn evaluate_compiled(plan: &ExecutionPlan, g: &KnowledgeGraph) -> Result<AnswerSet> {
    Ok(AnswerSet::from_bitset(&eval_node(&plan.root, g)?))
}

fn eval_node(node: &PlanNode, g: &KnowledgeGraph) -> Result<FixedBitSet> {
    let n = g.num_entities();
    Ok(match node {
        PlanNode::Anchor(e) => {
            if e.index() >= n {
                return Err(Error::IndexOutOfRange {
                    kind: "entity",
                    index: e.index(),
                    len: n,
                });
            }
            let mut b = FixedBitSet::with_capacity(n);
            b.insert(e.index());
            b
        }
        PlanNode::ExistentialLeaf => {
            let mut b = FixedBitSet::with_capacity(n);
            b.insert_range(..);
            b
        }
        PlanNode::Projection {
            relation,
            direction,
            input,
        } => {
            let src = eval_node(input, g)?;
            let mut out = FixedBitSet::with_capacity(n);
            for a in src.ones() {
                for &b in g.neighbors(EntityId(a as u32), *relation, *direction)? {
                    out.insert(b.index());
                }
            }
            out
        }
        PlanNode::Intersection(children) => {
            let mut it = children.iter();
            let first = it.next().ok_or(Error::EmptyInput)?;
            let mut acc = eval_node(first, g)?;
            for c in it {
                acc.intersect_with(&eval_node(c, g)?);
            }
            acc
        }
        PlanNode::Union(children) => {
            let mut acc = FixedBitSet::with_capacity(n);
            for c in children {
                acc.union_with(&eval_node(c, g)?);
            }
            acc
        }
        PlanNode::Negation(c) => {
            let mut b = eval_node(c, g)?;
            b.toggle_range(..);
            b
        }
    })
}
