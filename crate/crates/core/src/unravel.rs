//! Valid paths and depth-bounded unravelings.
//!
//! The unraveling of `q(x)` at depth `d` is the tree-like query whose nodes
//! are the valid paths of `q` of length at most `d`, with one atom for each
//! one-step extension of a path. It contains `q` (the map `z_P ↦ end(P)` is
//! a homomorphism), shrinks as `d` grows, and is contained in every
//! tree-like query of depth at most `d` that contains `q`.
//!
//! A path step is an atom together with the direction it is traversed in.
//! A path is valid when no step immediately undoes the previous one (same
//! atom, opposite direction). For atoms that are not self-loops this is the
//! same as forbidding the same atom twice in a row.
//!
//! Paths may run through constants. A path ending at a constant becomes a
//! constant leaf under its parent; when the path continues, a pass-through
//! variable (mapped to that constant) carries the continuation so the result
//! stays a single tree.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::homomorphism::Homomorphism;
use crate::kg::Direction;
use crate::query::{branch_graph, Atom, ConjunctiveQuery, Term};

pub const DEFAULT_DEPTH_LIMIT: usize = 16;
pub const DEFAULT_NODE_LIMIT: usize = 1_000_000;

/// One traversal of atom `atom` (an index into the query's atom list).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Step {
    pub atom: usize,
    pub direction: Direction,
}

impl Step {
    pub fn forward(atom: usize) -> Self {
        Step {
            atom,
            direction: Direction::Forward,
        }
    }

    pub fn backward(atom: usize) -> Self {
        Step {
            atom,
            direction: Direction::Backward,
        }
    }

    pub fn reverse(self) -> Self {
        Step {
            atom: self.atom,
            direction: self.direction.reverse(),
        }
    }

    /// Compact form used in names and provenance, e.g. `2f` or `0b`.
    pub fn signature(&self) -> String {
        let d = match self.direction {
            Direction::Forward => 'f',
            Direction::Backward => 'b',
        };
        format!("{}{}", self.atom, d)
    }
}

/// A walk from the target that need not be valid.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path {
    pub steps: Vec<Step>,
}

impl Path {
    pub fn new(steps: Vec<Step>) -> Self {
        Path { steps }
    }
}

/// A valid path `x_0, A_1, x_1, ..., A_k, x_k` with `x_0` the target.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ValidPath {
    steps: Vec<Step>,
    nodes: Vec<Term>,
}

/// The element a path ends at.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathEnd {
    pub element: Term,
    pub anchored: bool,
}

impl ValidPath {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// `x_0, ..., x_k`; one longer than [`steps`](Self::steps).
    pub fn nodes(&self) -> &[Term] {
        &self.nodes
    }

    pub fn end(&self) -> PathEnd {
        let element = self.nodes[self.nodes.len() - 1].clone();
        PathEnd {
            anchored: element.is_const(),
            element,
        }
    }

    pub fn is_anchored(&self) -> bool {
        self.nodes[self.nodes.len() - 1].is_const()
    }

    pub fn to_path(&self) -> Path {
        Path::new(self.steps.clone())
    }

    /// Step signature such as `0f.1f.2f`; empty for the length-0 path.
    pub fn signature(&self) -> String {
        let parts: Vec<String> = self.steps.iter().map(Step::signature).collect();
        parts.join(".")
    }

    /// Checks both path invariants against `atoms`.
    pub fn check(&self, target: &str, atoms: &[Atom]) -> bool {
        match walk(target, atoms, &self.steps) {
            Ok(nodes) => nodes == self.nodes && is_valid(&self.steps),
            Err(_) => false,
        }
    }
}

fn step_target<'a>(atoms: &'a [Atom], from: &Term, step: Step) -> Option<&'a Term> {
    let a = atoms.get(step.atom)?;
    match step.direction {
        Direction::Forward if &a.subject == from => Some(&a.object),
        Direction::Backward if &a.object == from => Some(&a.subject),
        _ => None,
    }
}

/// Node sequence of a walk, or an argument error if a step does not start
/// where the previous one ended.
fn walk(target: &str, atoms: &[Atom], steps: &[Step]) -> Result<Vec<Term>> {
    let mut nodes = Vec::with_capacity(steps.len() + 1);
    nodes.push(Term::Var(target.into()));
    for (i, &s) in steps.iter().enumerate() {
        let cur = &nodes[nodes.len() - 1];
        let next = step_target(atoms, cur, s).ok_or_else(|| {
            Error::Argument(format!("step {i} ({}) does not leave {cur}", s.signature()))
        })?;
        nodes.push(next.clone());
    }
    Ok(nodes)
}

fn is_valid(steps: &[Step]) -> bool {
    steps.windows(2).all(|w| w[1] != w[0].reverse())
}

/// Steps leaving `node`, in `(atom, Forward < Backward)` order.
fn steps_from(atoms: &[Atom], node: &Term) -> Vec<(Step, Term)> {
    let mut out = Vec::new();
    for (i, a) in atoms.iter().enumerate() {
        if &a.subject == node {
            out.push((Step::forward(i), a.object.clone()));
        }
        if &a.object == node {
            out.push((Step::backward(i), a.subject.clone()));
        }
    }
    out
}

/// All valid paths of length at most `depth`, in lexicographic step order
/// (every path precedes its extensions).
pub fn valid_paths(q: &ConjunctiveQuery, depth: usize) -> Result<Vec<ValidPath>> {
    let atoms = q.pure_atoms()?;
    let mut out = Vec::new();
    let root = ValidPath {
        steps: Vec::new(),
        nodes: alloc::vec![q.target_term()],
    };
    collect_paths(atoms, root, depth, &mut out, usize::MAX)?;
    Ok(out)
}

fn collect_paths(atoms: &[Atom], path: ValidPath, depth: usize, out: &mut Vec<ValidPath>, limit: usize) -> Result<()> {
    if out.len() >= limit {
        return Err(Error::Argument(format!("more than {limit} valid paths")));
    }
    let extensions = if path.len() < depth {
        let end = &path.nodes[path.nodes.len() - 1];
        let last = path.steps.last().copied();
        steps_from(atoms, end)
            .into_iter()
            .filter(|(s, _)| Some(s.reverse()) != last)
            .collect()
    } else {
        Vec::new()
    };
    out.push(path.clone());
    for (step, next) in extensions {
        let mut ext = path.clone();
        ext.steps.push(step);
        ext.nodes.push(next);
        collect_paths(atoms, ext, depth, out, limit)?;
    }
    Ok(())
}

/// Cancels every `y, A, z, A, y` detour until the path is valid. The result
/// ends where `path` ends and does not depend on the cancellation order.
pub fn canonicalize_path(q: &ConjunctiveQuery, path: &Path) -> Result<ValidPath> {
    let atoms = q.pure_atoms()?;
    walk(&q.target, atoms, &path.steps)?;
    let mut steps: Vec<Step> = Vec::with_capacity(path.steps.len());
    for &s in &path.steps {
        if steps.last().map(|l| l.reverse()) == Some(s) {
            steps.pop();
        } else {
            steps.push(s);
        }
    }
    let nodes = walk(&q.target, atoms, &steps)?;
    Ok(ValidPath { steps, nodes })
}

/// A constant occurrence in the unraveling and the walk that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstantLeaf {
    /// Index of the leaf's atom in the unraveled query.
    pub atom: usize,
    pub constant: String,
    /// Path of the parent node plus the step into the constant. For leaves
    /// that step back through the parent's last atom this walk is not valid.
    pub path: Path,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Provenance {
    /// Unraveling variable name to the valid path it stands for.
    pub variables: BTreeMap<String, ValidPath>,
    pub constant_leaves: Vec<ConstantLeaf>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnravelResult {
    pub query: ConjunctiveQuery,
    pub provenance: Provenance,
    pub depth: usize,
}

impl UnravelResult {
    /// The map `z_P ↦ end(P)`, constants to themselves.
    pub fn canonical_map(&self) -> Homomorphism {
        let mut mapping = BTreeMap::new();
        for (name, path) in &self.provenance.variables {
            mapping.insert(Term::Var(name.clone()), path.end().element);
        }
        for leaf in &self.provenance.constant_leaves {
            let c = Term::Const(leaf.constant.clone());
            mapping.insert(c.clone(), c);
        }
        Homomorphism::from_mapping(mapping)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UnravelOptions {
    /// Largest accepted depth; larger requests are an error.
    pub depth_limit: usize,
    /// Largest number of valid paths enumerated before giving up.
    pub node_limit: usize,
}

impl Default for UnravelOptions {
    fn default() -> Self {
        UnravelOptions {
            depth_limit: DEFAULT_DEPTH_LIMIT,
            node_limit: DEFAULT_NODE_LIMIT,
        }
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Name of the unraveling variable for `path`: the target name, a hash of
/// the step signature and the visited elements.
pub fn path_variable_name(target: &str, path: &ValidPath) -> String {
    if path.is_empty() {
        return target.into();
    }
    let crumb: Vec<&str> = path.nodes.iter().map(Term::name).collect();
    format!(
        "{target}_{:016x}_{}",
        fnv1a64(path.signature().as_bytes()),
        crumb.join("-")
    )
}

pub fn unravel(q: &ConjunctiveQuery, depth: usize) -> Result<UnravelResult> {
    unravel_with(q, depth, &UnravelOptions::default())
}

pub fn unravel_with(q: &ConjunctiveQuery, depth: usize, opts: &UnravelOptions) -> Result<UnravelResult> {
    let atoms = q.pure_atoms()?;
    if depth == 0 {
        return Err(Error::Argument("unraveling depth must be at least 1".into()));
    }
    if depth > opts.depth_limit {
        return Err(Error::DepthLimit {
            depth,
            limit: opts.depth_limit,
        });
    }
    if !branch_graph(&q.target, atoms).is_connected() {
        return Err(Error::Disconnected);
    }

    let mut paths = Vec::new();
    let root = ValidPath {
        steps: Vec::new(),
        nodes: alloc::vec![q.target_term()],
    };
    collect_paths(atoms, root, depth, &mut paths, opts.node_limit)?;
    let index: BTreeMap<&[Step], usize> = paths
        .iter()
        .enumerate()
        .map(|(i, p)| (p.steps.as_slice(), i))
        .collect();
    let mut children: Vec<Vec<usize>> = alloc::vec![Vec::new(); paths.len()];
    for (i, p) in paths.iter().enumerate().skip(1) {
        children[index[&p.steps[..p.len() - 1]]].push(i);
    }

    // A path is a variable node when it ends at a variable, or ends at a
    // constant and has something below it in the tree.
    let backtrack_leaf = |p: &ValidPath| -> bool {
        p.len() >= 1 && p.len() < depth && p.nodes[p.len() - 1].is_const()
    };
    let is_node: Vec<bool> = paths
        .iter()
        .enumerate()
        .map(|(i, p)| !p.is_anchored() || (p.len() < depth && (!children[i].is_empty() || backtrack_leaf(p))))
        .collect();

    let mut names: Vec<Option<String>> = alloc::vec![None; paths.len()];
    let mut used = BTreeSet::new();
    let mut provenance = Provenance::default();
    for (i, p) in paths.iter().enumerate() {
        if !is_node[i] {
            continue;
        }
        let mut name = path_variable_name(&q.target, p);
        if !used.insert(name.clone()) {
            name = format!("{name}_{}", p.signature());
            used.insert(name.clone());
        }
        provenance.variables.insert(name.clone(), p.clone());
        names[i] = Some(name);
    }

    let mut out_atoms = Vec::new();
    let push_atom = |rel: &str, parent: Term, child: Term, dir: Direction, out: &mut Vec<Atom>| {
        let atom = match dir {
            Direction::Forward => Atom::new(rel, parent, child),
            Direction::Backward => Atom::new(rel, child, parent),
        };
        out.push(atom);
        out.len() - 1
    };
    for (i, p) in paths.iter().enumerate() {
        let Some(parent_name) = &names[i] else {
            continue;
        };
        let parent = Term::Var(parent_name.clone());
        for &c in &children[i] {
            let child = &paths[c];
            let step = child.steps[child.len() - 1];
            let rel = atoms[step.atom].relation.as_str();
            if let Some(child_name) = &names[c] {
                push_atom(rel, parent.clone(), Term::Var(child_name.clone()), step.direction, &mut out_atoms);
            }
            if child.is_anchored() {
                let constant = child.end().element;
                let atom = push_atom(rel, parent.clone(), constant.clone(), step.direction, &mut out_atoms);
                provenance.constant_leaves.push(ConstantLeaf {
                    atom,
                    constant: constant.name().into(),
                    path: child.to_path(),
                });
            }
        }
        if backtrack_leaf(p) {
            let back = p.steps[p.len() - 1].reverse();
            let rel = atoms[back.atom].relation.as_str();
            let constant = p.nodes[p.len() - 1].clone();
            let atom = push_atom(rel, parent.clone(), constant.clone(), back.direction, &mut out_atoms);
            let mut walk = p.to_path();
            walk.steps.push(back);
            provenance.constant_leaves.push(ConstantLeaf {
                atom,
                constant: constant.name().into(),
                path: walk,
            });
        }
    }

    let mut query = ConjunctiveQuery::new(&q.target, out_atoms);
    query.id = q.id.as_ref().map(|id| format!("{id}@d{depth}"));
    Ok(UnravelResult {
        query,
        provenance,
        depth,
    })
}
