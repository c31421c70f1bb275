//! Link predictors: scores in `[0, 1]` for `(head, relation, tail)`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kg::{Direction, EntityId, KnowledgeGraph, RelationId};

pub trait LinkPredictor: Sync {
    fn num_entities(&self) -> usize;
    fn num_relations(&self) -> usize;

    fn score(&self, rel: RelationId, head: EntityId, tail: EntityId) -> f32;

    /// Scores of `rel(head, ·)` over all tails. Implementations may return
    /// their own storage or fill `buf`.
    fn row<'a>(&'a self, rel: RelationId, head: EntityId, buf: &'a mut Vec<f32>) -> &'a [f32] {
        buf.clear();
        buf.extend((0..self.num_entities() as u32).map(|t| self.score(rel, head, EntityId(t))));
        buf
    }

    /// Scores of `rel(·, tail)` over all heads.
    fn column(&self, rel: RelationId, tail: EntityId, buf: &mut Vec<f32>) {
        buf.clear();
        buf.extend((0..self.num_entities() as u32).map(|h| self.score(rel, EntityId(h), tail)));
    }

    /// For `{0,1}`-valued predictors: the entities scored 1 next to `node`.
    fn crisp_neighbors(&self, _rel: RelationId, _node: EntityId, _dir: Direction) -> Option<&[EntityId]> {
        None
    }
}

/// Scores 1 exactly on the edges of a graph.
#[derive(Clone, Copy, Debug)]
pub struct CrispPredictor<'a> {
    graph: &'a KnowledgeGraph,
}

impl<'a> CrispPredictor<'a> {
    pub fn new(graph: &'a KnowledgeGraph) -> Self {
        CrispPredictor { graph }
    }

    pub fn graph(&self) -> &KnowledgeGraph {
        self.graph
    }
}

impl LinkPredictor for CrispPredictor<'_> {
    fn num_entities(&self) -> usize {
        self.graph.num_entities()
    }

    fn num_relations(&self) -> usize {
        self.graph.num_relations()
    }

    fn score(&self, rel: RelationId, head: EntityId, tail: EntityId) -> f32 {
        if self.graph.contains(head, rel, tail) {
            1.0
        } else {
            0.0
        }
    }

    fn row<'a>(&'a self, rel: RelationId, head: EntityId, buf: &'a mut Vec<f32>) -> &'a [f32] {
        buf.clear();
        buf.resize(self.num_entities(), 0.0);
        for &t in self.graph.neighbors_unchecked(head, rel, Direction::Forward) {
            buf[t.index()] = 1.0;
        }
        buf
    }

    fn column(&self, rel: RelationId, tail: EntityId, buf: &mut Vec<f32>) {
        buf.clear();
        buf.resize(self.num_entities(), 0.0);
        for &h in self.graph.neighbors_unchecked(tail, rel, Direction::Backward) {
            buf[h.index()] = 1.0;
        }
    }

    fn crisp_neighbors(&self, rel: RelationId, node: EntityId, dir: Direction) -> Option<&[EntityId]> {
        Some(self.graph.neighbors_unchecked(node, rel, dir))
    }
}

/// Dense cache of every score of another predictor, one `|E| x |E|` block
/// per relation. Rows are contiguous.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    num_entities: usize,
    num_relations: usize,
    scores: Vec<f32>,
}

impl ScoreTable {
    pub fn from_predictor<P: LinkPredictor + ?Sized>(p: &P) -> Self {
        let n = p.num_entities();
        let m = p.num_relations();
        let mut scores = Vec::with_capacity(n * n * m);
        let mut buf = Vec::with_capacity(n);
        for r in 0..m as u32 {
            for h in 0..n as u32 {
                scores.extend_from_slice(p.row(RelationId(r), EntityId(h), &mut buf));
            }
        }
        ScoreTable {
            num_entities: n,
            num_relations: m,
            scores,
        }
    }

    /// Builds a table from raw row-major scores, `[relation][head][tail]`.
    pub fn from_scores(num_entities: usize, num_relations: usize, scores: Vec<f32>) -> Result<Self> {
        if scores.len() != num_entities * num_entities * num_relations {
            return Err(Error::Predictor("score table has the wrong size".into()));
        }
        if scores.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::Predictor("score outside [0, 1]".into()));
        }
        Ok(ScoreTable {
            num_entities,
            num_relations,
            scores,
        })
    }

    fn offset(&self, rel: RelationId, head: EntityId) -> usize {
        (rel.index() * self.num_entities + head.index()) * self.num_entities
    }
}

impl LinkPredictor for ScoreTable {
    fn num_entities(&self) -> usize {
        self.num_entities
    }

    fn num_relations(&self) -> usize {
        self.num_relations
    }

    fn score(&self, rel: RelationId, head: EntityId, tail: EntityId) -> f32 {
        self.scores[self.offset(rel, head) + tail.index()]
    }

    fn row<'a>(&'a self, rel: RelationId, head: EntityId, _buf: &'a mut Vec<f32>) -> &'a [f32] {
        let o = self.offset(rel, head);
        &self.scores[o..o + self.num_entities]
    }
}
