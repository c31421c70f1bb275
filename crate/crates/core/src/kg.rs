//! Immutable knowledge graphs with per-relation forward and backward indexes.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationId(pub u32);

impl EntityId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// Traversal direction of a labeled edge `R(head, tail)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    /// head to tail
    Forward,
    /// tail to head
    Backward,
}

impl Direction {
    pub fn reverse(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: u32, relation: u32, tail: u32) -> Self {
        Triple {
            head: EntityId(head),
            relation: RelationId(relation),
            tail: EntityId(tail),
        }
    }
}

/// Dense name to id assignment in first-appearance order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dictionary {
    names: Vec<String>,
    ids: BTreeMap<String, u32>,
}

impl Dictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_insert(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Names in id order.
    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Compressed adjacency of one relation in one direction.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Adjacency {
    offsets: Vec<u32>,
    targets: Vec<EntityId>,
}

impl Adjacency {
    fn build(num_entities: usize, mut pairs: Vec<(EntityId, EntityId)>) -> Self {
        pairs.sort_unstable();
        let mut offsets = Vec::with_capacity(num_entities + 1);
        let mut targets = Vec::with_capacity(pairs.len());
        let mut cursor = 0;
        for node in 0..num_entities {
            offsets.push(targets.len() as u32);
            while cursor < pairs.len() && pairs[cursor].0.index() == node {
                targets.push(pairs[cursor].1);
                cursor += 1;
            }
        }
        offsets.push(targets.len() as u32);
        Adjacency { offsets, targets }
    }

    fn get(&self, node: usize) -> &[EntityId] {
        let lo = self.offsets[node] as usize;
        let hi = self.offsets[node + 1] as usize;
        &self.targets[lo..hi]
    }
}

/// A knowledge graph `(E, R, S)`.
///
/// Immutable after construction. Entity and relation ids are dense and
/// index every downstream vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KnowledgeGraph {
    entities: Dictionary,
    relations: Dictionary,
    edges: Vec<Triple>,
    fwd: Vec<Adjacency>,
    bwd: Vec<Adjacency>,
}

impl KnowledgeGraph {
    fn from_parts(entities: Dictionary, relations: Dictionary, edges: BTreeSet<Triple>) -> Self {
        let n = entities.len();
        let mut fwd_pairs = alloc::vec![Vec::new(); relations.len()];
        let mut bwd_pairs = alloc::vec![Vec::new(); relations.len()];
        for t in &edges {
            fwd_pairs[t.relation.index()].push((t.head, t.tail));
            bwd_pairs[t.relation.index()].push((t.tail, t.head));
        }
        let fwd = fwd_pairs.into_iter().map(|p| Adjacency::build(n, p)).collect();
        let bwd = bwd_pairs.into_iter().map(|p| Adjacency::build(n, p)).collect();
        KnowledgeGraph {
            entities,
            relations,
            edges: edges.into_iter().collect(),
            fwd,
            bwd,
        }
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// All triples, sorted by `(head, relation, tail)`.
    pub fn edges(&self) -> &[Triple] {
        &self.edges
    }

    pub fn entities(&self) -> &Dictionary {
        &self.entities
    }

    pub fn relations(&self) -> &Dictionary {
        &self.relations
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entities.id(name).map(EntityId)
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relations.id(name).map(RelationId)
    }

    pub fn entity_name(&self, id: EntityId) -> Option<&str> {
        self.entities.name(id.0)
    }

    pub fn relation_name(&self, id: RelationId) -> Option<&str> {
        self.relations.name(id.0)
    }

    fn check_entity(&self, id: EntityId) -> Result<()> {
        if id.index() < self.num_entities() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                kind: "entity",
                index: id.index(),
                len: self.num_entities(),
            })
        }
    }

    fn check_relation(&self, id: RelationId) -> Result<()> {
        if id.index() < self.num_relations() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                kind: "relation",
                index: id.index(),
                len: self.num_relations(),
            })
        }
    }

    /// Tails of `rel(node, ·)` for [`Direction::Forward`], heads of
    /// `rel(·, node)` for [`Direction::Backward`]. Sorted ascending.
    pub fn neighbors(&self, node: EntityId, rel: RelationId, direction: Direction) -> Result<&[EntityId]> {
        self.check_entity(node)?;
        self.check_relation(rel)?;
        Ok(self.neighbors_unchecked(node, rel, direction))
    }

    pub(crate) fn neighbors_unchecked(&self, node: EntityId, rel: RelationId, direction: Direction) -> &[EntityId] {
        match direction {
            Direction::Forward => self.fwd[rel.index()].get(node.index()),
            Direction::Backward => self.bwd[rel.index()].get(node.index()),
        }
    }

    pub fn contains(&self, head: EntityId, rel: RelationId, tail: EntityId) -> bool {
        if head.index() >= self.num_entities()
            || tail.index() >= self.num_entities()
            || rel.index() >= self.num_relations()
        {
            return false;
        }
        self.neighbors_unchecked(head, rel, Direction::Forward)
            .binary_search(&tail)
            .is_ok()
    }

    /// Union of two graphs by name. Ids of `self` are preserved; names only
    /// present in `other` are appended in their `other` id order.
    pub fn merge(&self, other: &KnowledgeGraph) -> KnowledgeGraph {
        let mut builder = GraphBuilder::from_graph(self);
        for t in &other.edges {
            builder.add(
                other.entity_name(t.head).unwrap_or_default(),
                other.relation_name(t.relation).unwrap_or_default(),
                other.entity_name(t.tail).unwrap_or_default(),
            );
        }
        let (entities, relations, edges) = builder.into_parts();
        KnowledgeGraph::from_parts(entities, relations, edges)
    }

    /// A graph over the same dictionaries holding only `edges`.
    pub fn with_edges<I>(&self, edges: I) -> Result<KnowledgeGraph>
    where
        I: IntoIterator<Item = Triple>,
    {
        let mut set = BTreeSet::new();
        for t in edges {
            self.check_entity(t.head)?;
            self.check_entity(t.tail)?;
            self.check_relation(t.relation)?;
            set.insert(t);
        }
        Ok(KnowledgeGraph::from_parts(
            self.entities.clone(),
            self.relations.clone(),
            set,
        ))
    }

    /// Edges incident to `node` in either direction, as
    /// `(relation, other endpoint, direction from node)`.
    pub fn incident(&self, node: EntityId) -> Vec<(RelationId, EntityId, Direction)> {
        let mut out = Vec::new();
        for r in 0..self.num_relations() as u32 {
            let rel = RelationId(r);
            for &t in self.neighbors_unchecked(node, rel, Direction::Forward) {
                out.push((rel, t, Direction::Forward));
            }
            for &h in self.neighbors_unchecked(node, rel, Direction::Backward) {
                out.push((rel, h, Direction::Backward));
            }
        }
        out
    }
}

/// Accumulates named triples; duplicates collapse.
#[derive(Clone, Debug, Default)]
pub struct GraphBuilder {
    entities: Dictionary,
    relations: Dictionary,
    edges: BTreeSet<Triple>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts from the dictionaries and edges of an existing graph.
    pub fn from_graph(g: &KnowledgeGraph) -> Self {
        GraphBuilder {
            entities: g.entities.clone(),
            relations: g.relations.clone(),
            edges: g.edges.iter().copied().collect(),
        }
    }

    /// Starts from the dictionaries of an existing graph with no edges, so
    /// that splits loaded afterwards share its ids.
    pub fn with_dictionaries(g: &KnowledgeGraph) -> Self {
        GraphBuilder {
            entities: g.entities.clone(),
            relations: g.relations.clone(),
            edges: BTreeSet::new(),
        }
    }

    pub fn add(&mut self, head: &str, relation: &str, tail: &str) -> Triple {
        let h = self.entities.get_or_insert(head);
        let r = self.relations.get_or_insert(relation);
        let t = self.entities.get_or_insert(tail);
        let triple = Triple::new(h, r, t);
        self.edges.insert(triple);
        triple
    }

    pub fn add_entity(&mut self, name: &str) -> EntityId {
        EntityId(self.entities.get_or_insert(name))
    }

    pub fn add_relation(&mut self, name: &str) -> RelationId {
        RelationId(self.relations.get_or_insert(name))
    }

    /// Adds a triple by id; both endpoints and the relation must exist.
    pub fn add_triple(&mut self, t: Triple) -> Result<()> {
        for (kind, index, len) in [
            ("entity", t.head.index(), self.entities.len()),
            ("entity", t.tail.index(), self.entities.len()),
            ("relation", t.relation.index(), self.relations.len()),
        ] {
            if index >= len {
                return Err(Error::IndexOutOfRange { kind, index, len });
            }
        }
        self.edges.insert(t);
        Ok(())
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    fn into_parts(self) -> (Dictionary, Dictionary, BTreeSet<Triple>) {
        (self.entities, self.relations, self.edges)
    }

    pub fn build(self) -> Result<KnowledgeGraph> {
        if self.edges.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let (e, r, s) = self.into_parts();
        Ok(KnowledgeGraph::from_parts(e, r, s))
    }
}
