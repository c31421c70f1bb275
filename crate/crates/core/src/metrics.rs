//! Ranking and cardinality metrics.
//!
//! Ties are broken by average rank everywhere, in filtered ranks and in
//! Spearman correlation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::eval::AnswerSet;
use crate::kg::EntityId;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum RankScope {
    #[default]
    HardOnly,
    All,
}

/// Rank of `answer` among itself and every non-answer, by descending score.
/// Other answers are never competitors.
pub fn filtered_rank(scores: &[f64], answer: EntityId, all_answers: &AnswerSet) -> Result<f64> {
    if !all_answers.contains(answer) {
        return Err(Error::Argument(format!("entity {answer} is not an answer")));
    }
    let s = *scores.get(answer.index()).ok_or(Error::IndexOutOfRange {
        kind: "entity",
        index: answer.index(),
        len: scores.len(),
    })?;
    let mut higher = 0usize;
    let mut tied = 0usize;
    let mut answers = all_answers.iter().peekable();
    for (i, &x) in scores.iter().enumerate() {
        // skip answers with a merge walk over the sorted set
        while answers.peek().is_some_and(|a| a.index() < i) {
            answers.next();
        }
        if answers.peek().is_some_and(|a| a.index() == i) {
            continue;
        }
        if x > s {
            higher += 1;
        } else if x == s {
            tied += 1;
        }
    }
    Ok(1.0 + higher as f64 + 0.5 * tied as f64)
}

/// Ranking outcome of one query, without its score vector.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryOutcome {
    pub id: String,
    pub query_type: String,
    /// Filtered ranks of the in-scope answers.
    pub ranks: Vec<f64>,
    pub predicted_count: usize,
    pub true_count: usize,
}

impl QueryOutcome {
    pub fn reciprocal_rank(&self) -> Result<f64> {
        if self.ranks.is_empty() {
            return Err(Error::Argument(format!("query {} has no ranked answers", self.id)));
        }
        Ok(self.ranks.iter().map(|r| 1.0 / r).sum::<f64>() / self.ranks.len() as f64)
    }

    pub fn hits(&self, k: usize) -> Result<f64> {
        if self.ranks.is_empty() {
            return Err(Error::Argument(format!("query {} has no ranked answers", self.id)));
        }
        let hit = self.ranks.iter().filter(|&&r| r <= k as f64).count();
        Ok(hit as f64 / self.ranks.len() as f64)
    }
}

/// Everything needed to score one executed query.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryEvalRecord<'a> {
    pub id: &'a str,
    pub query_type: &'a str,
    pub scores: &'a [f64],
    pub easy: &'a AnswerSet,
    pub hard: &'a AnswerSet,
    pub predicted_count: usize,
}

impl QueryEvalRecord<'_> {
    pub fn true_count(&self) -> usize {
        self.easy.len() + self.hard.len()
    }

    pub fn outcome(&self, scope: RankScope) -> Result<QueryOutcome> {
        let all = self.easy.union(self.hard);
        let ranked = match scope {
            RankScope::HardOnly => self.hard,
            RankScope::All => &all,
        };
        if ranked.is_empty() {
            return Err(Error::Argument(format!("query {} has no answers in scope", self.id)));
        }
        let ranks = ranked
            .iter()
            .map(|a| filtered_rank(self.scores, a, &all))
            .collect::<Result<Vec<_>>>()?;
        Ok(QueryOutcome {
            id: self.id.into(),
            query_type: self.query_type.into(),
            ranks,
            predicted_count: self.predicted_count,
            true_count: all.len(),
        })
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> Result<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for x in xs {
        sum += x;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(sum / n as f64)
}

/// Mean reciprocal rank. Per-query averaging unless `pooled`, which
/// averages over all ranked answers directly.
pub fn mrr(outcomes: &[QueryOutcome], pooled: bool) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::EmptyInput);
    }
    if pooled {
        mean(outcomes.iter().flat_map(|o| o.ranks.iter().map(|r| 1.0 / r)))
    } else {
        let per = outcomes.iter().map(QueryOutcome::reciprocal_rank).collect::<Result<Vec<_>>>()?;
        mean(per.into_iter())
    }
}

pub fn hits_at(outcomes: &[QueryOutcome], k: usize) -> Result<f64> {
    let per = outcomes.iter().map(|o| o.hits(k)).collect::<Result<Vec<_>>>()?;
    mean(per.into_iter())
}

/// Ranks starting at 1, tied values sharing the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = alloc::vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / libm::sqrt(saa * sbb)).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Argument(format!(
            "length mismatch: {} predictions, {} truths",
            pred.len(),
            truth.len()
        )));
    }
    if pred.len() < 2 {
        return Err(Error::Argument("spearman needs at least two pairs".into()));
    }
    let constant = |xs: &[f64]| xs.iter().all(|&x| x == xs[0]);
    if constant(pred) {
        return Err(Error::UndefinedCorrelation("predicted counts are constant"));
    }
    if constant(truth) {
        return Err(Error::UndefinedCorrelation("true counts are constant"));
    }
    pearson(&average_ranks(pred), &average_ranks(truth))
        .ok_or(Error::UndefinedCorrelation("zero rank variance"))
}

/// Mean absolute percentage error, as a fraction.
pub fn mape(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Argument("length mismatch".into()));
    }
    if truth.iter().any(|&t| t == 0.0) {
        return Err(Error::Argument("true count of zero".into()));
    }
    mean(pred.iter().zip(truth).map(|(p, t)| (p - t).abs() / t))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TypeMetrics {
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    /// Absent when either count list is constant or there are fewer than
    /// two queries.
    pub spearmanr: Option<f64>,
    pub mape: f64,
    pub n: usize,
}

impl TypeMetrics {
    pub fn from_outcomes(outcomes: &[QueryOutcome], pooled: bool) -> Result<Self> {
        let pred: Vec<f64> = outcomes.iter().map(|o| o.predicted_count as f64).collect();
        let truth: Vec<f64> = outcomes.iter().map(|o| o.true_count as f64).collect();
        let spearmanr = match spearman(&pred, &truth) {
            Ok(v) => Some(v),
            Err(Error::UndefinedCorrelation(_)) | Err(Error::Argument(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(TypeMetrics {
            mrr: mrr(outcomes, pooled)?,
            hits1: hits_at(outcomes, 1)?,
            hits3: hits_at(outcomes, 3)?,
            hits10: hits_at(outcomes, 10)?,
            spearmanr,
            mape: mape(&pred, &truth)?,
            n: outcomes.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub per_type: BTreeMap<String, TypeMetrics>,
    pub aggregate: TypeMetrics,
}

impl MetricsReport {
    /// Aggregates outcomes in query-id order, whatever order they arrive in.
    pub fn from_outcomes(mut outcomes: Vec<QueryOutcome>, pooled: bool) -> Result<Self> {
        outcomes.sort_by(|a, b| a.id.cmp(&b.id));
        let mut groups: BTreeMap<String, Vec<QueryOutcome>> = BTreeMap::new();
        for o in &outcomes {
            groups.entry(o.query_type.clone()).or_default().push(o.clone());
        }
        let mut per_type = BTreeMap::new();
        for (t, group) in groups {
            per_type.insert(t, TypeMetrics::from_outcomes(&group, pooled)?);
        }
        Ok(MetricsReport {
            per_type,
            aggregate: TypeMetrics::from_outcomes(&outcomes, pooled)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn set(ids: &[u32]) -> AnswerSet {
        ids.iter().map(|&i| EntityId(i)).collect()
    }

    #[test]
    fn rank_basics() {
        let scores = [1.0, 0.0, 0.0, 0.0];
        assert_eq!(filtered_rank(&scores, EntityId(0), &set(&[0])).unwrap(), 1.0);
        let tie = [0.9, 0.9, 0.1];
        assert_eq!(filtered_rank(&tie, EntityId(0), &set(&[0])).unwrap(), 1.5);
        assert!(filtered_rank(&tie, EntityId(2), &set(&[0])).is_err());
    }

    #[test]
    fn other_answers_are_filtered() {
        let scores = [0.2, 0.9, 0.8, 0.1];
        assert_eq!(filtered_rank(&scores, EntityId(0), &set(&[0, 1, 2])).unwrap(), 1.0);
        assert_eq!(filtered_rank(&scores, EntityId(0), &set(&[0])).unwrap(), 3.0);
    }

    #[test]
    fn rank_counting_oracle() {
        let mut state = 17u64;
        let mut next = || {
            state = crate::derive_seed(state, 3);
            (state % 5) as f64 / 4.0
        };
        for _ in 0..100 {
            let scores: Vec<f64> = (0..12).map(|_| next()).collect();
            let answers = set(&[1, 4, 7]);
            for a in answers.iter() {
                let s = scores[a.index()];
                let others = (0..12).filter(|&i| !answers.contains(EntityId(i as u32)));
                let higher = others.clone().filter(|&i| scores[i] > s).count();
                let tied = others.filter(|&i| scores[i] == s).count();
                let expect = 1.0 + higher as f64 + 0.5 * tied as f64;
                assert_eq!(filtered_rank(&scores, a, &answers).unwrap(), expect);
            }
        }
    }

    fn outcome(id: &str, ranks: Vec<f64>, pred: usize, truth: usize) -> QueryOutcome {
        QueryOutcome {
            id: id.into(),
            query_type: "t".into(),
            ranks,
            predicted_count: pred,
            true_count: truth,
        }
    }

    #[test]
    fn mrr_single_rank_four() {
        let o = [outcome("a", vec![4.0], 1, 1)];
        assert_eq!(mrr(&o, false).unwrap(), 0.25);
        assert_eq!(mrr(&[], false), Err(Error::EmptyInput));
    }

    #[test]
    fn mrr_pooled_differs() {
        let o = [outcome("a", vec![1.0], 1, 1), outcome("b", vec![2.0, 4.0], 1, 1)];
        assert!((mrr(&o, false).unwrap() - (1.0 + 0.375) / 2.0).abs() < 1e-15);
        assert!((mrr(&o, true).unwrap() - 1.75 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn spearman_basics() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(spearman(&a, &[10.0, 20.0, 30.0, 40.0]).unwrap(), 1.0);
        assert_eq!(spearman(&a, &[4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert!(matches!(spearman(&a, &[1.0; 4]), Err(Error::UndefinedCorrelation(_))));
        assert!(spearman(&a, &[1.0]).is_err());
    }

    #[test]
    fn average_ranks_with_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn mape_basics() {
        assert_eq!(mape(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mape(&[2.0, 4.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert!(mape(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn hits_are_monotone() {
        let o = [outcome("a", vec![1.0, 2.5, 7.0, 12.0], 1, 4)];
        let (h1, h3, h10) = (hits_at(&o, 1).unwrap(), hits_at(&o, 3).unwrap(), hits_at(&o, 10).unwrap());
        assert!(h1 <= h3 && h3 <= h10 && h10 <= 1.0);
        assert_eq!((h1, h3, h10), (0.25, 0.5, 0.75));
    }

    #[test]
    fn report_groups_by_type_in_id_order() {
        let mut a = outcome("q2", vec![1.0], 2, 2);
        a.query_type = "x".into();
        let b = outcome("q1", vec![2.0], 1, 3);
        let c = outcome("q0", vec![1.0], 3, 1);
        let r1 = MetricsReport::from_outcomes(vec![a.clone(), b.clone(), c.clone()], false).unwrap();
        let r2 = MetricsReport::from_outcomes(vec![c, a, b], false).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.per_type["x"].n, 1);
        assert_eq!(r1.per_type["x"].spearmanr, None);
        assert_eq!(r1.aggregate.n, 3);
    }

    #[test]
    fn record_outcome() {
        let scores = [0.1, 0.9, 0.5, 0.7];
        let easy = set(&[1]);
        let hard = set(&[2]);
        let rec = QueryEvalRecord {
            id: "q",
            query_type: "1p",
            scores: &scores,
            easy: &easy,
            hard: &hard,
            predicted_count: 3,
        };
        let o = rec.outcome(RankScope::HardOnly).unwrap();
        assert_eq!(o.ranks, vec![2.0]);
        assert_eq!(o.true_count, 2);
        let o = rec.outcome(RankScope::All).unwrap();
        assert_eq!(o.ranks, vec![1.0, 2.0]);
    }
}
