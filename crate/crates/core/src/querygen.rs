//! Query workload sampling and labeling.
//!
//! Queries are instantiated around a target entity of the full graph, so
//! each has at least one answer there. Easy answers hold on the training
//! graph (and the full one); hard answers only on the full graph.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::eval::{evaluate, AnswerSet};
use crate::kg::{Direction, EntityId, KnowledgeGraph, RelationId};
use crate::query::{Atom, ConjunctiveQuery, Term};
use crate::unravel::{unravel, UnravelResult};

pub const DEFAULT_MAX_ATTEMPTS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QueryType {
    P1,
    P2,
    P3,
    I2,
    I3,
    Ip,
    Pi,
    In2,
    In3,
    Inp,
    Pin,
    Pni,
    U2,
    Up,
    DoublePath,
    Triangle,
    Square,
}

impl QueryType {
    pub const ALL: [QueryType; 17] = [
        QueryType::P1,
        QueryType::P2,
        QueryType::P3,
        QueryType::I2,
        QueryType::I3,
        QueryType::Ip,
        QueryType::Pi,
        QueryType::In2,
        QueryType::In3,
        QueryType::Inp,
        QueryType::Pin,
        QueryType::Pni,
        QueryType::U2,
        QueryType::Up,
        QueryType::DoublePath,
        QueryType::Triangle,
        QueryType::Square,
    ];

    /// The fourteen tree-like operator types.
    pub const WORKLOAD: [QueryType; 14] = [
        QueryType::P1,
        QueryType::P2,
        QueryType::P3,
        QueryType::I2,
        QueryType::I3,
        QueryType::Ip,
        QueryType::Pi,
        QueryType::In2,
        QueryType::In3,
        QueryType::Inp,
        QueryType::Pin,
        QueryType::Pni,
        QueryType::U2,
        QueryType::Up,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QueryType::P1 => "1p",
            QueryType::P2 => "2p",
            QueryType::P3 => "3p",
            QueryType::I2 => "2i",
            QueryType::I3 => "3i",
            QueryType::Ip => "ip",
            QueryType::Pi => "pi",
            QueryType::In2 => "2in",
            QueryType::In3 => "3in",
            QueryType::Inp => "inp",
            QueryType::Pin => "pin",
            QueryType::Pni => "pni",
            QueryType::U2 => "2u",
            QueryType::Up => "up",
            QueryType::DoublePath => "double_path",
            QueryType::Triangle => "triangle",
            QueryType::Square => "square",
        }
    }

    pub fn is_cyclic(self) -> bool {
        matches!(self, QueryType::DoublePath | QueryType::Triangle | QueryType::Square)
    }

    pub fn has_negation(self) -> bool {
        matches!(
            self,
            QueryType::In2 | QueryType::In3 | QueryType::Inp | QueryType::Pin | QueryType::Pni
        )
    }
}

impl fmt::Display for QueryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QueryType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        QueryType::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown query type {s}")))
    }
}

/// Which anchors become existential variables.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Unanchor {
    #[default]
    None,
    All,
    /// Each anchor independently with even odds, at least one.
    RandomSubset,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenConfig {
    pub count: usize,
    pub seed: u64,
    pub unanchor: Unanchor,
    /// Reject queries without a hard answer.
    pub require_hard: bool,
    pub max_attempts: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            count: 100,
            seed: 13,
            unanchor: Unanchor::None,
            require_hard: true,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledQuery {
    pub query: ConjunctiveQuery,
    pub query_type: QueryType,
    pub easy: AnswerSet,
    pub hard: AnswerSet,
}

impl LabeledQuery {
    pub fn id(&self) -> &str {
        self.query.id.as_deref().unwrap_or_default()
    }

    pub fn all_answers(&self) -> AnswerSet {
        self.easy.union(&self.hard)
    }
}

/// Neighbor lists of the full graph, built once per workload.
pub struct Neighborhood {
    /// `(relation, other, direction from this entity)`, sorted.
    incident: Vec<Vec<(RelationId, EntityId, Direction)>>,
    /// Per entity: adjacent entity to the edges joining them.
    adjacent: Vec<BTreeMap<EntityId, Vec<(RelationId, Direction)>>>,
    active: Vec<EntityId>,
}

impl Neighborhood {
    pub fn new(g: &KnowledgeGraph) -> Self {
        let n = g.num_entities();
        let mut incident = Vec::with_capacity(n);
        let mut adjacent = Vec::with_capacity(n);
        for e in 0..n as u32 {
            let inc = g.incident(EntityId(e));
            let mut adj: BTreeMap<EntityId, Vec<(RelationId, Direction)>> = BTreeMap::new();
            for &(r, o, d) in &inc {
                adj.entry(o).or_default().push((r, d));
            }
            incident.push(inc);
            adjacent.push(adj);
        }
        let active = (0..n as u32)
            .map(EntityId)
            .filter(|e| !incident[e.index()].is_empty())
            .collect();
        Neighborhood {
            incident,
            adjacent,
            active,
        }
    }

    fn random_active(&self, rng: &mut ChaCha8Rng) -> Option<EntityId> {
        if self.active.is_empty() {
            return None;
        }
        Some(self.active[rng.gen_range(0..self.active.len())])
    }

    fn random_edge(&self, rng: &mut ChaCha8Rng, e: EntityId) -> Option<(RelationId, EntityId, Direction)> {
        let inc = &self.incident[e.index()];
        if inc.is_empty() {
            return None;
        }
        Some(inc[rng.gen_range(0..inc.len())])
    }

    fn random_link(&self, rng: &mut ChaCha8Rng, a: EntityId, b: EntityId) -> Option<(RelationId, Direction)> {
        let links = self.adjacent[a.index()].get(&b)?;
        Some(links[rng.gen_range(0..links.len())])
    }

    /// Neighbors of `a` also adjacent to `b`, excluding `skip`.
    fn common(&self, a: EntityId, b: EntityId, skip: &[EntityId]) -> Vec<EntityId> {
        self.adjacent[a.index()]
            .keys()
            .filter(|&&c| !skip.contains(&c) && self.adjacent[b.index()].contains_key(&c))
            .copied()
            .collect()
    }
}

enum Node {
    Anchor,
    Inner(Vec<Operand>),
}

struct Operand {
    negated: bool,
    child: Node,
}

fn pos(child: Node) -> Operand {
    Operand { negated: false, child }
}

fn neg(child: Node) -> Operand {
    Operand { negated: true, child }
}

fn hop(child: Node) -> Node {
    Node::Inner(alloc::vec![pos(child)])
}

fn template(t: QueryType) -> Option<Node> {
    use Node::Anchor as A;
    Some(match t {
        QueryType::P1 => hop(A),
        QueryType::P2 => hop(hop(A)),
        QueryType::P3 => hop(hop(hop(A))),
        QueryType::I2 => Node::Inner(alloc::vec![pos(A), pos(A)]),
        QueryType::I3 => Node::Inner(alloc::vec![pos(A), pos(A), pos(A)]),
        QueryType::Ip => hop(Node::Inner(alloc::vec![pos(A), pos(A)])),
        QueryType::Pi => Node::Inner(alloc::vec![pos(hop(A)), pos(A)]),
        QueryType::In2 => Node::Inner(alloc::vec![pos(A), neg(A)]),
        QueryType::In3 => Node::Inner(alloc::vec![pos(A), pos(A), neg(A)]),
        QueryType::Inp => hop(Node::Inner(alloc::vec![pos(A), neg(A)])),
        QueryType::Pin => Node::Inner(alloc::vec![pos(hop(A)), neg(A)]),
        QueryType::Pni => Node::Inner(alloc::vec![neg(hop(A)), pos(A)]),
        _ => return None,
    })
}

struct Sampler<'a> {
    g: &'a KnowledgeGraph,
    nb: &'a Neighborhood,
    rng: ChaCha8Rng,
    fresh: usize,
}

impl Sampler<'_> {
    fn var(&mut self) -> Term {
        self.fresh += 1;
        Term::Var(format!("v{}", self.fresh))
    }

    fn entity(&self, e: EntityId) -> Term {
        Term::Const(self.g.entity_name(e).unwrap_or_default().to_string())
    }

    fn atom(&self, r: RelationId, node: Term, other: Term, dir: Direction, negated: bool) -> Atom {
        let rel = self.g.relation_name(r).unwrap_or_default();
        let (s, o) = match dir {
            Direction::Forward => (node, other),
            Direction::Backward => (other, node),
        };
        if negated {
            Atom::negated(rel, s, o)
        } else {
            Atom::new(rel, s, o)
        }
    }

    /// Atoms of `node` rooted at `term`, which stands for entity `e`.
    fn inner(&mut self, node: &Node, term: Term, e: EntityId, out: &mut Vec<Atom>) -> Option<()> {
        let Node::Inner(ops) = node else {
            return Some(());
        };
        for op in ops {
            // a negated operand is grown around some other entity so that
            // it tends not to hold at `e`
            let at = if op.negated {
                let mut other = self.nb.random_active(&mut self.rng)?;
                if other == e {
                    other = self.nb.random_active(&mut self.rng)?;
                }
                other
            } else {
                e
            };
            let (r, next, dir) = self.nb.random_edge(&mut self.rng, at)?;
            let child = match op.child {
                Node::Anchor => self.entity(next),
                Node::Inner(_) => self.var(),
            };
            out.push(self.atom(r, term.clone(), child.clone(), dir, op.negated));
            self.inner(&op.child, child, next, out)?;
        }
        Some(())
    }

    fn one_hop(&mut self, term: Term, e: EntityId) -> Option<Atom> {
        let (r, next, dir) = self.nb.random_edge(&mut self.rng, e)?;
        let c = self.entity(next);
        Some(self.atom(r, term, c, dir, false))
    }

    fn link(&mut self, a: EntityId, ta: Term, b: EntityId, tb: Term) -> Option<Atom> {
        let (r, dir) = self.nb.random_link(&mut self.rng, a, b)?;
        Some(self.atom(r, ta, tb, dir, false))
    }

    fn pick(&mut self, xs: &[EntityId]) -> Option<EntityId> {
        if xs.is_empty() {
            return None;
        }
        Some(xs[self.rng.gen_range(0..xs.len())])
    }

    fn shape(&mut self, t: QueryType) -> Option<Vec<Vec<Atom>>> {
        let target = self.nb.random_active(&mut self.rng)?;
        let x = Term::var("x");
        if let Some(node) = template(t) {
            let mut atoms = Vec::new();
            self.inner(&node, x, target, &mut atoms)?;
            return Some(alloc::vec![atoms]);
        }
        match t {
            QueryType::U2 => {
                let a = self.one_hop(x.clone(), target)?;
                let b = self.one_hop(x, target)?;
                (a != b).then(|| alloc::vec![alloc::vec![a], alloc::vec![b]])
            }
            QueryType::Up => {
                let (r, mid, dir) = self.nb.random_edge(&mut self.rng, target)?;
                let y = self.var();
                let top = self.atom(r, x, y.clone(), dir, false);
                let a = self.one_hop(y.clone(), mid)?;
                let b = self.one_hop(y, mid)?;
                (a != b).then(|| alloc::vec![alloc::vec![top.clone(), a], alloc::vec![top, b]])
            }
            QueryType::Triangle => {
                let (_, y, _) = self.nb.random_edge(&mut self.rng, target)?;
                let zs = self.nb.common(y, target, &[target, y]);
                let z = self.pick(&zs)?;
                let (ty, tz) = (self.var(), self.var());
                Some(alloc::vec![alloc::vec![
                    self.link(target, x.clone(), y, ty.clone())?,
                    self.link(y, ty, z, tz.clone())?,
                    self.link(z, tz, target, x)?,
                ]])
            }
            QueryType::Square => {
                let (_, y, _) = self.nb.random_edge(&mut self.rng, target)?;
                let (_, z, _) = self.nb.random_edge(&mut self.rng, y)?;
                if z == target || z == y {
                    return None;
                }
                let ws = self.nb.common(z, target, &[target, y, z]);
                let w = self.pick(&ws)?;
                let (ty, tz, tw) = (self.var(), self.var(), self.var());
                Some(alloc::vec![alloc::vec![
                    self.link(target, x.clone(), y, ty.clone())?,
                    self.link(y, ty, z, tz.clone())?,
                    self.link(z, tz, w, tw.clone())?,
                    self.link(w, tw, target, x)?,
                ]])
            }
            QueryType::DoublePath => {
                // two distinct atoms joining x and the same neighbor
                let ys: Vec<EntityId> = self.nb.adjacent[target.index()]
                    .iter()
                    .filter(|(&o, l)| o != target && l.len() >= 2)
                    .map(|(&o, _)| o)
                    .collect();
                let y = self.pick(&ys)?;
                let links = &self.nb.adjacent[target.index()][&y];
                let i = self.rng.gen_range(0..links.len());
                let mut j = self.rng.gen_range(0..links.len() - 1);
                if j >= i {
                    j += 1;
                }
                let ((r1, d1), (r2, d2)) = (links[i], links[j]);
                let ty = self.var();
                Some(alloc::vec![alloc::vec![
                    self.atom(r1, x.clone(), ty.clone(), d1, false),
                    self.atom(r2, x, ty, d2, false),
                ]])
            }
            _ => None,
        }
    }

    fn unanchor(&mut self, branches: Vec<Vec<Atom>>, mode: Unanchor) -> Vec<Vec<Atom>> {
        if mode == Unanchor::None {
            return branches;
        }
        let total: usize = branches
            .iter()
            .flatten()
            .map(|a| a.subject.is_const() as usize + a.object.is_const() as usize)
            .sum();
        let mut keep: Vec<bool> = match mode {
            Unanchor::All => alloc::vec![false; total],
            _ => (0..total).map(|_| self.rng.gen_bool(0.5)).collect(),
        };
        if total > 0 && keep.iter().all(|&k| k) {
            let i = self.rng.gen_range(0..total);
            keep[i] = false;
        }
        // the same anchor occurrence appears in every union branch that
        // shares its atom, so replacements are keyed by atom content
        let mut seen: BTreeMap<(Atom, bool), Term> = BTreeMap::new();
        let mut k = 0;
        let mut out = Vec::with_capacity(branches.len());
        for branch in branches {
            let mut nb = Vec::with_capacity(branch.len());
            for a in branch {
                let mut a2 = a.clone();
                for subject in [true, false] {
                    let t = if subject { &a.subject } else { &a.object };
                    if !t.is_const() {
                        continue;
                    }
                    let idx = k;
                    k += 1;
                    if keep[idx] {
                        continue;
                    }
                    let key = (a.clone(), subject);
                    let v = match seen.get(&key) {
                        Some(v) => v.clone(),
                        None => {
                            let v = self.var();
                            seen.insert(key, v.clone());
                            v
                        }
                    };
                    if subject {
                        a2.subject = v;
                    } else {
                        a2.object = v;
                    }
                }
                nb.push(a2);
            }
            out.push(nb);
        }
        out
    }
}

fn has_duplicate_atoms(branches: &[Vec<Atom>]) -> bool {
    branches.iter().any(|b| {
        let mut sorted = b.clone();
        sorted.sort();
        sorted.windows(2).any(|w| w[0] == w[1])
    })
}

fn check_graphs(train: &KnowledgeGraph, full: &KnowledgeGraph) -> Result<()> {
    if train.entities() != full.entities() || train.relations() != full.relations() {
        return Err(Error::Argument("train and full graphs must share dictionaries".into()));
    }
    Ok(())
}

/// The `index`-th query of a workload. Its randomness only depends on
/// `(cfg.seed, index)`.
pub fn generate_one(
    t: QueryType,
    train: &KnowledgeGraph,
    full: &KnowledgeGraph,
    nb: &Neighborhood,
    cfg: &GenConfig,
    index: usize,
) -> Result<LabeledQuery> {
    let mut s = Sampler {
        g: full,
        nb,
        rng: ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, index as u64)),
        fresh: 0,
    };
    let id = format!("{}-{index:05}", t.name());
    for _ in 0..cfg.max_attempts {
        s.fresh = 0;
        let Some(branches) = s.shape(t) else { continue };
        if has_duplicate_atoms(&branches) {
            continue;
        }
        let branches = s.unanchor(branches, cfg.unanchor);
        let query = ConjunctiveQuery::union("x", branches).with_id(&id);
        let all = evaluate(&query, full)?;
        if all.is_empty() {
            continue;
        }
        // negation makes answers non-monotone in the graph, so train-only
        // answers are dropped
        let easy = evaluate(&query, train)?.intersection(&all);
        let hard = all.difference(&easy);
        if cfg.require_hard && hard.is_empty() {
            continue;
        }
        return Ok(LabeledQuery {
            query,
            query_type: t,
            easy,
            hard,
        });
    }
    Err(Error::Exhausted {
        shape: t.name().into(),
        attempts: cfg.max_attempts,
    })
}

pub fn generate(t: QueryType, train: &KnowledgeGraph, full: &KnowledgeGraph, cfg: &GenConfig) -> Result<Vec<LabeledQuery>> {
    check_graphs(train, full)?;
    let nb = Neighborhood::new(full);
    (0..cfg.count).map(|i| generate_one(t, train, full, &nb, cfg, i)).collect()
}

/// One depth's worth of unraveled queries; labels come from the originals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnraveledQuery {
    pub original: Box<LabeledQuery>,
    pub unraveled: UnravelResult,
}

/// Unravels every query of `batch` at each depth, in the order given.
pub fn unravel_workload(batch: &[LabeledQuery], depths: &[usize]) -> Result<Vec<(usize, Vec<UnraveledQuery>)>> {
    if depths.is_empty() {
        return Err(Error::Argument("no depths requested".into()));
    }
    depths
        .iter()
        .map(|&d| {
            let items = batch
                .iter()
                .map(|q| {
                    Ok(UnraveledQuery {
                        original: Box::new(q.clone()),
                        unraveled: unravel(&q.query, d)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((d, items))
        })
        .collect()
}
