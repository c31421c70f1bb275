//! Workload evaluation: unravel cyclic queries, execute plans against a
//! predictor and aggregate per type, once per depth.

use rayon::prelude::*;
use unravel_core::fuzzy::{execute, predicted_cardinality, FuzzyConfig};
use unravel_core::metrics::{MetricsReport, QueryEvalRecord, QueryOutcome, RankScope};
use unravel_core::plan::compile_plan;
use unravel_core::predictor::LinkPredictor;
use unravel_core::query::classify;
use unravel_core::querygen::LabeledQuery;
use unravel_core::unravel::unravel;
use unravel_core::{ConjunctiveQuery, KnowledgeGraph};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSettings {
    pub fuzzy: FuzzyConfig,
    pub depths: Vec<usize>,
    pub scope: RankScope,
    pub pooled: bool,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            fuzzy: FuzzyConfig::default(),
            depths: vec![3],
            scope: RankScope::HardOnly,
            pooled: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DepthReport {
    pub depth: usize,
    pub report: MetricsReport,
    /// Queries with no answer in the ranking scope.
    pub skipped: usize,
}

pub fn is_cyclic(q: &ConjunctiveQuery) -> Result<bool> {
    Ok(q.is_pure() && classify(q)?.is_cyclic)
}

/// The query actually executed at `depth`: the unraveling for pure cyclic
/// queries, the query itself otherwise.
pub fn executable_query(q: &ConjunctiveQuery, depth: usize) -> Result<ConjunctiveQuery> {
    if is_cyclic(q)? {
        Ok(unravel(q, depth)?.query)
    } else {
        Ok(q.clone())
    }
}

/// `None` when the query has no answer in scope.
pub fn evaluate_query<P: LinkPredictor + ?Sized>(
    q: &LabeledQuery,
    depth: usize,
    g: &KnowledgeGraph,
    predictor: &P,
    settings: &EvalSettings,
) -> Result<Option<QueryOutcome>> {
    let in_scope = match settings.scope {
        RankScope::HardOnly => !q.hard.is_empty(),
        RankScope::All => !q.easy.is_empty() || !q.hard.is_empty(),
    };
    if !in_scope {
        return Ok(None);
    }
    let plan = compile_plan(&executable_query(&q.query, depth)?, g)?;
    let scores = execute(&plan, predictor, &settings.fuzzy)?;
    let record = QueryEvalRecord {
        id: q.id(),
        query_type: q.query_type.name(),
        scores: scores.scores(),
        easy: &q.easy,
        hard: &q.hard,
        predicted_count: predicted_cardinality(&scores, &settings.fuzzy),
    };
    Ok(Some(record.outcome(settings.scope)?))
}

/// One report per requested depth. Runs on the current rayon pool; the
/// result does not depend on its size.
pub fn evaluate_workload<P: LinkPredictor + ?Sized>(
    batch: &[LabeledQuery],
    g: &KnowledgeGraph,
    predictor: &P,
    settings: &EvalSettings,
) -> Result<Vec<DepthReport>> {
    if settings.depths.is_empty() {
        return Err(CliError::Usage("empty depth list".into()));
    }
    settings.fuzzy.validate()?;
    if predictor.num_entities() != g.num_entities() || predictor.num_relations() != g.num_relations() {
        return Err(CliError::Core(unravel_core::Error::Binding(format!(
            "predictor covers {} entities and {} relations, graph dictionary has {} and {}",
            predictor.num_entities(),
            predictor.num_relations(),
            g.num_entities(),
            g.num_relations()
        ))));
    }
    let mut reports = Vec::with_capacity(settings.depths.len());
    for &depth in &settings.depths {
        let results: Vec<Option<QueryOutcome>> = batch
            .par_iter()
            .map(|q| evaluate_query(q, depth, g, predictor, settings))
            .collect::<Result<_>>()?;
        let skipped = results.iter().filter(|r| r.is_none()).count();
        let outcomes: Vec<QueryOutcome> = results.into_iter().flatten().collect();
        if outcomes.is_empty() {
            return Err(CliError::Format("no query has an answer in the ranking scope".into()));
        }
        reports.push(DepthReport {
            depth,
            report: MetricsReport::from_outcomes(outcomes, settings.pooled)?,
            skipped,
        });
    }
    Ok(reports)
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    Ok(pool.install(f))
}
