//! Conjunctive queries, their query graphs and shape classification.
//!
//! A [`ConjunctiveQuery`] carries a list of branches (a disjunction of
//! conjunctions) and per-atom negation flags so one type covers both pure
//! CQs and the union/negation workload types. Operations that need a pure
//! CQ call [`ConjunctiveQuery::pure_atoms`] and reject anything else.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    /// An entity name, resolved against a graph at bind time.
    Const(String),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(name.to_string())
    }

    pub fn constant(name: &str) -> Self {
        Term::Const(name.to_string())
    }

    pub fn name(&self) -> &str {
        match self {
            Term::Var(n) | Term::Const(n) => n,
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Term::Const(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(n) => write!(f, "?{n}"),
            Term::Const(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub relation: String,
    pub subject: Term,
    pub object: Term,
    pub negated: bool,
}

impl Atom {
    pub fn new(relation: &str, subject: Term, object: Term) -> Self {
        Atom {
            relation: relation.to_string(),
            subject,
            object,
            negated: false,
        }
    }

    pub fn negated(relation: &str, subject: Term, object: Term) -> Self {
        Atom {
            negated: true,
            ..Atom::new(relation, subject, object)
        }
    }

    pub fn is_self_loop(&self) -> bool {
        self.subject == self.object
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "!")?;
        }
        write!(f, "{}({}, {})", self.relation, self.subject, self.object)
    }
}

/// A unary query `q(target) <- branch_1 | ... | branch_n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConjunctiveQuery {
    pub id: Option<String>,
    pub target: String,
    pub branches: Vec<Vec<Atom>>,
}

impl ConjunctiveQuery {
    pub fn new(target: &str, atoms: Vec<Atom>) -> Self {
        ConjunctiveQuery {
            id: None,
            target: target.to_string(),
            branches: alloc::vec![atoms],
        }
    }

    pub fn union(target: &str, branches: Vec<Vec<Atom>>) -> Self {
        ConjunctiveQuery {
            id: None,
            target: target.to_string(),
            branches,
        }
    }

    pub fn with_id(mut self, id: &str) -> Self {
        self.id = Some(id.to_string());
        self
    }

    pub fn target_term(&self) -> Term {
        Term::Var(self.target.clone())
    }

    pub fn is_pure(&self) -> bool {
        self.branches.len() == 1 && self.branches[0].iter().all(|a| !a.negated)
    }

    /// Atoms of a pure CQ (one branch, no negation).
    pub fn pure_atoms(&self) -> Result<&[Atom]> {
        if self.branches.len() != 1 {
            return Err(Error::UnsupportedShape(format!(
                "expected a single conjunction, found {} branches",
                self.branches.len()
            )));
        }
        if let Some(a) = self.branches[0].iter().find(|a| a.negated) {
            return Err(Error::UnsupportedShape(format!("negated atom {a}")));
        }
        Ok(&self.branches[0])
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.branches.iter().flatten()
    }

    /// `Var(q)`: variables occurring in atoms.
    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for a in self.atoms() {
            for t in [&a.subject, &a.object] {
                if let Term::Var(n) = t {
                    out.insert(n.clone());
                }
            }
        }
        out
    }

    /// `Con(q)`: constants occurring in atoms.
    pub fn constants(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for a in self.atoms() {
            for t in [&a.subject, &a.object] {
                if let Term::Const(n) = t {
                    out.insert(n.clone());
                }
            }
        }
        out
    }

    /// Structural checks independent of any graph: at least one branch, and
    /// the target occurs in every nonempty branch.
    pub fn validate(&self) -> Result<()> {
        if self.branches.is_empty() {
            return Err(Error::InvalidQuery("query has no branches".into()));
        }
        let target = self.target_term();
        for (i, branch) in self.branches.iter().enumerate() {
            if branch.is_empty() {
                if self.branches.len() > 1 {
                    return Err(Error::InvalidQuery(format!("branch {i} is empty")));
                }
                continue;
            }
            if !branch.iter().any(|a| a.subject == target || a.object == target) {
                return Err(Error::InvalidQuery(format!(
                    "target {} does not occur in branch {i}",
                    self.target
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for ConjunctiveQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q({}) <- ", self.target)?;
        for (i, branch) in self.branches.iter().enumerate() {
            if i > 0 {
                write!(f, " | ")?;
            }
            if branch.is_empty() {
                write!(f, "true")?;
            }
            for (j, a) in branch.iter().enumerate() {
                if j > 0 {
                    write!(f, " & ")?;
                }
                write!(f, "{a}")?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QueryNode {
    Var(String),
    /// One occurrence of a constant; `atom` is the atom it occurs in.
    ConstOcc { name: String, atom: usize },
}

impl QueryNode {
    pub fn is_const(&self) -> bool {
        matches!(self, QueryNode::ConstOcc { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QueryEdge {
    pub from: usize,
    pub to: usize,
    pub atom: usize,
}

/// Multigraph over `Var(q) ∪ ConOcc(q)` with one edge per atom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryGraph {
    pub nodes: Vec<QueryNode>,
    pub edges: Vec<QueryEdge>,
    /// Node of the target variable.
    pub root: usize,
}

impl QueryGraph {
    /// Undirected incidence: for each node, `(edge index, other node)`.
    pub fn incidence(&self) -> Vec<Vec<(usize, usize)>> {
        let mut inc = alloc::vec![Vec::new(); self.nodes.len()];
        for (i, e) in self.edges.iter().enumerate() {
            inc[e.from].push((i, e.to));
            if e.from != e.to {
                inc[e.to].push((i, e.from));
            }
        }
        inc
    }

    /// BFS distances from the root; `None` for unreachable nodes.
    pub fn distances(&self) -> Vec<Option<usize>> {
        let inc = self.incidence();
        let mut dist = alloc::vec![None; self.nodes.len()];
        let mut queue = VecDeque::new();
        dist[self.root] = Some(0);
        queue.push_back(self.root);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &(_, v) in &inc[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.distances().iter().all(Option::is_some)
    }

    /// A forest has no undirected cycle, self-loops and parallel edges
    /// included.
    pub fn is_forest(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.nodes.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &self.edges {
            let a = find(&mut parent, e.from);
            let b = find(&mut parent, e.to);
            if a == b {
                return false;
            }
            parent[a] = b;
        }
        true
    }
}

/// Builds the query graph of a single branch. Negation flags are ignored;
/// shape only depends on the atoms.
pub(crate) fn branch_graph(target: &str, atoms: &[Atom]) -> QueryGraph {
    let mut nodes = alloc::vec![QueryNode::Var(target.to_string())];
    let mut var_nodes = BTreeMap::new();
    var_nodes.insert(target.to_string(), 0usize);
    let mut node_of = |t: &Term, atom: usize, nodes: &mut Vec<QueryNode>| -> usize {
        match t {
            Term::Var(n) => *var_nodes.entry(n.clone()).or_insert_with(|| {
                nodes.push(QueryNode::Var(n.clone()));
                nodes.len() - 1
            }),
            Term::Const(n) => {
                nodes.push(QueryNode::ConstOcc {
                    name: n.clone(),
                    atom,
                });
                nodes.len() - 1
            }
        }
    };
    let mut edges = Vec::with_capacity(atoms.len());
    for (i, a) in atoms.iter().enumerate() {
        let from = node_of(&a.subject, i, &mut nodes);
        let to = node_of(&a.object, i, &mut nodes);
        edges.push(QueryEdge { from, to, atom: i });
    }
    QueryGraph {
        nodes,
        edges,
        root: 0,
    }
}

/// Query graph of a pure CQ.
pub fn build_query_graph(q: &ConjunctiveQuery) -> Result<QueryGraph> {
    let atoms = q.pure_atoms()?;
    Ok(branch_graph(&q.target, atoms))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShapeReport {
    pub is_tree_like: bool,
    pub is_anchored: bool,
    pub is_cyclic: bool,
    /// Longest root-to-leaf path; present iff tree-like.
    pub depth: Option<usize>,
}

pub(crate) fn shape_of_graph(g: &QueryGraph) -> Result<ShapeReport> {
    let dist = g.distances();
    if dist.iter().any(Option::is_none) {
        return Err(Error::Disconnected);
    }
    // connected: a tree iff |edges| = |nodes| - 1
    let is_tree_like = g.edges.len() + 1 == g.nodes.len();
    if !is_tree_like {
        return Ok(ShapeReport {
            is_tree_like: false,
            is_anchored: false,
            is_cyclic: true,
            depth: None,
        });
    }
    let inc = g.incidence();
    let is_anchored = !g.edges.is_empty()
        && (0..g.nodes.len())
            .filter(|&n| n != g.root && inc[n].len() == 1)
            .all(|n| g.nodes[n].is_const());
    let depth = dist.iter().flatten().copied().max().unwrap_or(0);
    Ok(ShapeReport {
        is_tree_like: true,
        is_anchored,
        is_cyclic: false,
        depth: Some(depth),
    })
}

/// Classifies a pure CQ as tree-like (anchored or not) or cyclic.
pub fn classify(q: &ConjunctiveQuery) -> Result<ShapeReport> {
    let g = build_query_graph(q)?;
    shape_of_graph(&g)
}

/// Shape of every branch, ignoring negation flags. Used for workload types.
pub fn classify_branches(q: &ConjunctiveQuery) -> Result<Vec<ShapeReport>> {
    q.branches
        .iter()
        .map(|b| shape_of_graph(&branch_graph(&q.target, b)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn v(n: &str) -> Term {
        Term::var(n)
    }
    fn c(n: &str) -> Term {
        Term::constant(n)
    }

    pub(crate) fn triangle() -> ConjunctiveQuery {
        ConjunctiveQuery::new(
            "x",
            vec![
                Atom::new("Friend", v("x"), v("y")),
                Atom::new("Friend", v("y"), v("z")),
                Atom::new("Coworker", v("z"), v("x")),
            ],
        )
    }

    #[test]
    fn triangle_graph_and_shape() {
        let q = triangle();
        let g = build_query_graph(&q).unwrap();
        assert_eq!((g.nodes.len(), g.edges.len()), (3, 3));
        let s = classify(&q).unwrap();
        assert!(s.is_cyclic && !s.is_tree_like && s.depth.is_none());
    }

    #[test]
    fn constant_occurrences_are_duplicated() {
        let q = ConjunctiveQuery::new(
            "x",
            vec![
                Atom::new("Employee", c("Tech"), v("x")),
                Atom::new("Employee", c("Tech"), v("y")),
            ],
        );
        let g = build_query_graph(&q).unwrap();
        assert_eq!((g.nodes.len(), g.edges.len()), (4, 2));
        // y is a component of its own
        assert_eq!(classify(&q), Err(Error::Disconnected));
    }

    #[test]
    fn self_loop_is_cyclic() {
        let q = ConjunctiveQuery::new("x", vec![Atom::new("R", v("x"), v("x"))]);
        let g = build_query_graph(&q).unwrap();
        assert_eq!((g.nodes.len(), g.edges.len()), (1, 1));
        assert_eq!(g.edges[0].from, g.edges[0].to);
        assert!(classify(&q).unwrap().is_cyclic);
    }

    #[test]
    fn parallel_atoms_are_cyclic() {
        let q = ConjunctiveQuery::new(
            "x",
            vec![Atom::new("R", v("x"), v("y")), Atom::new("S", v("y"), v("x"))],
        );
        assert!(classify(&q).unwrap().is_cyclic);
    }

    #[test]
    fn anchored_and_unanchored_two_hop() {
        let anchored = ConjunctiveQuery::new(
            "x",
            vec![
                Atom::new("Employee", c("Tech"), v("y")),
                Atom::new("Manages", v("y"), v("x")),
            ],
        );
        let s = classify(&anchored).unwrap();
        assert_eq!(
            s,
            ShapeReport {
                is_tree_like: true,
                is_anchored: true,
                is_cyclic: false,
                depth: Some(2)
            }
        );
        let open = ConjunctiveQuery::new(
            "x",
            vec![
                Atom::new("Employee", v("w"), v("y")),
                Atom::new("Manages", v("y"), v("x")),
            ],
        );
        let s = classify(&open).unwrap();
        assert!(s.is_tree_like && !s.is_anchored);
        assert_eq!(s.depth, Some(2));
    }

    #[test]
    fn empty_query_is_unanchored_depth_zero() {
        let q = ConjunctiveQuery::new("x", vec![]);
        let s = classify(&q).unwrap();
        assert!(s.is_tree_like && !s.is_anchored && !s.is_cyclic);
        assert_eq!(s.depth, Some(0));
    }

    #[test]
    fn impure_queries_are_rejected() {
        let neg = ConjunctiveQuery::new("x", vec![Atom::negated("R", c("a"), v("x"))]);
        assert!(matches!(build_query_graph(&neg), Err(Error::UnsupportedShape(_))));
        let uni = ConjunctiveQuery::union(
            "x",
            vec![vec![Atom::new("R", c("a"), v("x"))], vec![Atom::new("S", c("b"), v("x"))]],
        );
        assert!(matches!(classify(&uni), Err(Error::UnsupportedShape(_))));
        assert_eq!(classify_branches(&uni).unwrap().len(), 2);
    }

    #[test]
    fn validate_requires_target_in_each_branch() {
        let q = ConjunctiveQuery::new("x", vec![Atom::new("R", c("a"), v("y"))]);
        assert!(matches!(q.validate(), Err(Error::InvalidQuery(_))));
        assert!(triangle().validate().is_ok());
    }
}
