//! Bottom-up execution plans for tree-like queries.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::kg::{Direction, EntityId, KnowledgeGraph, RelationId};
use crate::query::{branch_graph, shape_of_graph, Atom, ConjunctiveQuery, QueryGraph, QueryNode};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PlanNode {
    Anchor(EntityId),
    /// An unanchored leaf variable; every entity qualifies.
    ExistentialLeaf,
    /// Image of `input` through `relation`. `Forward` maps heads to tails.
    Projection {
        relation: RelationId,
        direction: Direction,
        input: Box<PlanNode>,
    },
    Intersection(Vec<PlanNode>),
    Union(Vec<PlanNode>),
    Negation(Box<PlanNode>),
}

impl PlanNode {
    pub fn projection(relation: RelationId, direction: Direction, input: PlanNode) -> Self {
        PlanNode::Projection {
            relation,
            direction,
            input: Box::new(input),
        }
    }

    pub fn children(&self) -> Vec<&PlanNode> {
        match self {
            PlanNode::Anchor(_) | PlanNode::ExistentialLeaf => Vec::new(),
            PlanNode::Projection { input, .. } => alloc::vec![&**input],
            PlanNode::Negation(input) => alloc::vec![&**input],
            PlanNode::Intersection(c) | PlanNode::Union(c) => c.iter().collect(),
        }
    }

    pub fn contains_negation(&self) -> bool {
        matches!(self, PlanNode::Negation(_)) || self.children().iter().any(|c| c.contains_negation())
    }

    /// Number of projection steps on the longest root-to-leaf chain.
    pub fn depth(&self) -> usize {
        let below = self.children().iter().map(|c| c.depth()).max().unwrap_or(0);
        match self {
            PlanNode::Projection { .. } => below + 1,
            _ => below,
        }
    }

    pub fn relations(&self, out: &mut Vec<RelationId>) {
        if let PlanNode::Projection { relation, .. } = self {
            out.push(*relation);
        }
        for c in self.children() {
            c.relations(out);
        }
    }
}

impl fmt::Display for PlanNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, name: &str, c: &[PlanNode]| -> fmt::Result {
            write!(f, "{name}(")?;
            for (i, n) in c.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{n}")?;
            }
            write!(f, ")")
        };
        match self {
            PlanNode::Anchor(e) => write!(f, "Anchor({e})"),
            PlanNode::ExistentialLeaf => write!(f, "Exists"),
            PlanNode::Projection {
                relation,
                direction,
                input,
            } => {
                let d = match direction {
                    Direction::Forward => "fwd",
                    Direction::Backward => "bwd",
                };
                write!(f, "Proj(r{}, {d}, {input})", relation.0)
            }
            PlanNode::Intersection(c) => list(f, "And", c),
            PlanNode::Union(c) => list(f, "Or", c),
            PlanNode::Negation(c) => write!(f, "Not({c})"),
        }
    }
}

/// A compiled query; `root` yields the target variable's set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecutionPlan {
    pub root: PlanNode,
}

impl ExecutionPlan {
    pub fn relations(&self) -> Vec<RelationId> {
        let mut out = Vec::new();
        self.root.relations(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Compiles every branch of `q` (a union when there are several) against
/// the dictionaries of `g`.
///
/// Each branch must be tree-like. A negated atom negates the set flowing
/// through it and must be one operand of an intersection that also has a
/// positive operand.
pub fn compile_plan(q: &ConjunctiveQuery, g: &KnowledgeGraph) -> Result<ExecutionPlan> {
    q.validate()?;
    let mut branches = Vec::with_capacity(q.branches.len());
    for atoms in &q.branches {
        branches.push(compile_branch(&q.target, atoms, g)?);
    }
    let root = if branches.len() == 1 {
        branches.pop().ok_or(Error::EmptyInput)?
    } else {
        PlanNode::Union(branches)
    };
    Ok(ExecutionPlan { root })
}

fn compile_branch(target: &str, atoms: &[Atom], g: &KnowledgeGraph) -> Result<PlanNode> {
    let graph = branch_graph(target, atoms);
    let shape = shape_of_graph(&graph)?;
    if !shape.is_tree_like {
        return Err(Error::UnsupportedShape("cyclic query; unravel it before compiling".into()));
    }
    let inc = graph.incidence();
    build_node(&graph, &inc, atoms, g, graph.root, None)
}

fn build_node(
    graph: &QueryGraph,
    inc: &[Vec<(usize, usize)>],
    atoms: &[Atom],
    g: &KnowledgeGraph,
    node: usize,
    parent_edge: Option<usize>,
) -> Result<PlanNode> {
    match &graph.nodes[node] {
        QueryNode::ConstOcc { name, .. } => {
            let id = g
                .entity_id(name)
                .ok_or_else(|| Error::Binding(format!("unknown entity {name}")))?;
            Ok(PlanNode::Anchor(id))
        }
        QueryNode::Var(_) => {
            let mut operands = Vec::new();
            let mut positive = 0;
            for &(edge, other) in &inc[node] {
                if Some(edge) == parent_edge {
                    continue;
                }
                let atom = &atoms[graph.edges[edge].atom];
                let relation = g
                    .relation_id(&atom.relation)
                    .ok_or_else(|| Error::Binding(format!("unknown relation {}", atom.relation)))?;
                // R(child, node) maps child sets forward onto node
                let direction = if graph.edges[edge].to == node {
                    Direction::Forward
                } else {
                    Direction::Backward
                };
                let child = build_node(graph, inc, atoms, g, other, Some(edge))?;
                let proj = PlanNode::projection(relation, direction, child);
                if atom.negated {
                    operands.push(PlanNode::Negation(Box::new(proj)));
                } else {
                    positive += 1;
                    operands.push(proj);
                }
            }
            if operands.len() > positive && positive == 0 {
                return Err(Error::UnsupportedShape(
                    "negated atom without a positive sibling".into(),
                ));
            }
            Ok(match operands.len() {
                0 => PlanNode::ExistentialLeaf,
                1 => operands.pop().ok_or(Error::EmptyInput)?,
                _ => PlanNode::Intersection(operands),
            })
        }
    }
}
