//! Report files: JSON, an aligned text table and the depth sweep CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unravel_core::fuzzy::{Conjunction, Disjunction, FuzzyConfig, ProjectionMode};
use unravel_core::metrics::{RankScope, TypeMetrics};

use crate::error::{CliError, Result};
use crate::pipeline::{DepthReport, EvalSettings};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeMetricsJson {
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub spearmanr: Option<f64>,
    pub mape: f64,
    pub n: usize,
}

impl From<&TypeMetrics> for TypeMetricsJson {
    fn from(m: &TypeMetrics) -> Self {
        TypeMetricsJson {
            mrr: m.mrr,
            hits1: m.hits1,
            hits3: m.hits3,
            hits10: m.hits10,
            spearmanr: m.spearmanr,
            mape: m.mape,
            n: m.n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfigJson {
    pub depth: usize,
    pub projection: String,
    pub conj: String,
    pub disj: String,
    pub threshold: f64,
    pub scope: String,
    pub pooled: bool,
}

pub fn projection_name(p: ProjectionMode) -> &'static str {
    match p {
        ProjectionMode::MaxProduct => "max_product",
        ProjectionMode::NoisyOr => "noisy_or",
    }
}

pub fn conj_name(c: Conjunction) -> &'static str {
    match c {
        Conjunction::Product => "product",
        Conjunction::Min => "min",
    }
}

pub fn disj_name(d: Disjunction) -> &'static str {
    match d {
        Disjunction::ProbSum => "prob_sum",
        Disjunction::Max => "max",
    }
}

pub fn scope_name(s: RankScope) -> &'static str {
    match s {
        RankScope::HardOnly => "hard",
        RankScope::All => "all",
    }
}

impl EvalConfigJson {
    pub fn new(depth: usize, s: &EvalSettings) -> Self {
        let f: &FuzzyConfig = &s.fuzzy;
        EvalConfigJson {
            depth,
            projection: projection_name(f.projection).into(),
            conj: conj_name(f.conjunction).into(),
            disj: disj_name(f.disjunction).into(),
            threshold: f.count_threshold,
            scope: scope_name(s.scope).into(),
            pooled: s.pooled,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub dataset: String,
    pub predictor: String,
    pub config: EvalConfigJson,
    pub per_type: BTreeMap<String, TypeMetricsJson>,
    pub aggregate: TypeMetricsJson,
    pub skipped: usize,
}

impl ReportJson {
    pub fn new(dataset: &str, predictor: &str, d: &DepthReport, s: &EvalSettings) -> Self {
        ReportJson {
            dataset: dataset.into(),
            predictor: predictor.into(),
            config: EvalConfigJson::new(d.depth, s),
            per_type: d.report.per_type.iter().map(|(k, v)| (k.clone(), v.into())).collect(),
            aggregate: (&d.report.aggregate).into(),
            skipped: d.skipped,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| CliError::Internal(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// One row per type plus the aggregate.
    pub fn to_table(&self) -> String {
        let header = ["type", "n", "mrr", "hits1", "hits3", "hits10", "spearmanr", "mape"];
        let row = |name: &str, m: &TypeMetricsJson| -> Vec<String> {
            vec![
                name.to_owned(),
                m.n.to_string(),
                format!("{:.4}", m.mrr),
                format!("{:.4}", m.hits1),
                format!("{:.4}", m.hits3),
                format!("{:.4}", m.hits10),
                m.spearmanr.map_or("-".to_owned(), |v| format!("{v:.4}")),
                format!("{:.4}", m.mape),
            ]
        };
        let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        rows.extend(self.per_type.iter().map(|(k, m)| row(k, m)));
        rows.push(row("all", &self.aggregate));
        let widths: Vec<usize> = (0..header.len())
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = format!(
            "dataset {}  predictor {}  depth {}\n",
            self.dataset, self.predictor, self.config.depth
        );
        for r in rows {
            let cells: Vec<String> = r
                .iter()
                .enumerate()
                .map(|(c, v)| if c == 0 { format!("{v:<w$}", w = widths[c]) } else { format!("{v:>w$}", w = widths[c]) })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out
    }
}

/// Writes `report.json`/`report.txt`, or one pair per depth named
/// `report_depth{d}` when there are several.
pub fn write_reports(dir: &Path, reports: &[ReportJson]) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::new();
    for r in reports {
        let stem = if reports.len() == 1 {
            "report".to_owned()
        } else {
            format!("report_depth{}", r.config.depth)
        };
        for (ext, body) in [("json", r.to_json()?), ("txt", r.to_table())] {
            let path = dir.join(format!("{stem}.{ext}"));
            std::fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Depth sweep table with columns `depth,type,mrr,spearmanr,mape,hits1`.
/// An undefined Spearman coefficient is an empty field.
pub fn sweep_csv(reports: &[ReportJson]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Internal(e.to_string());
    w.write_record(["depth", "type", "mrr", "spearmanr", "mape", "hits1"]).map_err(err)?;
    for r in reports {
        for (t, m) in &r.per_type {
            w.write_record([
                r.config.depth.to_string(),
                t.clone(),
                m.mrr.to_string(),
                m.spearmanr.map(|v| v.to_string()).unwrap_or_default(),
                m.mape.to_string(),
                m.hits1.to_string(),
            ])
            .map_err(err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Internal(e.to_string()))
}
