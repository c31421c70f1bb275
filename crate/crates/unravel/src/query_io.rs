//! JSON forms of queries, workloads, unravelings and witnesses.
//!
//! A query is `{"id"?, "type"?, "target", "atoms": [...]}` or, for unions,
//! `{"target", "branches": [[...], ...]}`. An atom is
//! `{"rel", "s", "o", "neg"?}` where a term is a variable name or
//! `{"const": name}`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use unravel_core::eval::AnswerSet;
use unravel_core::homomorphism::Homomorphism;
use unravel_core::querygen::{LabeledQuery, QueryType};
use unravel_core::unravel::{Step, UnravelResult};
use unravel_core::{Atom, ConjunctiveQuery, Error as CoreError, KnowledgeGraph, Term};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TermJson {
    Var(String),
    Const {
        #[serde(rename = "const")]
        name: String,
    },
}

impl From<&Term> for TermJson {
    fn from(t: &Term) -> Self {
        match t {
            Term::Var(n) => TermJson::Var(n.clone()),
            Term::Const(n) => TermJson::Const { name: n.clone() },
        }
    }
}

impl From<TermJson> for Term {
    fn from(t: TermJson) -> Self {
        match t {
            TermJson::Var(n) => Term::Var(n),
            TermJson::Const { name } => Term::Const(name),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomJson {
    pub rel: String,
    pub s: TermJson,
    pub o: TermJson,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub neg: bool,
}

impl From<&Atom> for AtomJson {
    fn from(a: &Atom) -> Self {
        AtomJson {
            rel: a.relation.clone(),
            s: (&a.subject).into(),
            o: (&a.object).into(),
            neg: a.negated,
        }
    }
}

impl From<AtomJson> for Atom {
    fn from(a: AtomJson) -> Self {
        Atom {
            relation: a.rel,
            subject: a.s.into(),
            object: a.o.into(),
            negated: a.neg,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, rename = "type", skip_serializing_if = "Option::is_none")]
    pub query_type: Option<String>,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<AtomJson>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branches: Option<Vec<Vec<AtomJson>>>,
}

impl QueryJson {
    pub fn from_query(q: &ConjunctiveQuery, query_type: Option<&str>) -> Self {
        let conv = |b: &Vec<Atom>| b.iter().map(AtomJson::from).collect::<Vec<_>>();
        let (atoms, branches) = if q.branches.len() == 1 {
            (Some(conv(&q.branches[0])), None)
        } else {
            (None, Some(q.branches.iter().map(conv).collect()))
        };
        QueryJson {
            id: q.id.clone(),
            query_type: query_type.map(str::to_owned),
            target: q.target.clone(),
            atoms,
            branches,
        }
    }

    pub fn into_query(self) -> Result<ConjunctiveQuery> {
        let conv = |b: Vec<AtomJson>| b.into_iter().map(Atom::from).collect::<Vec<_>>();
        let branches = match (self.atoms, self.branches) {
            (Some(a), None) => vec![conv(a)],
            (None, Some(b)) => b.into_iter().map(conv).collect(),
            _ => {
                return Err(CliError::Format(
                    "a query needs exactly one of \"atoms\" and \"branches\"".into(),
                ))
            }
        };
        let q = ConjunctiveQuery {
            id: self.id,
            target: self.target,
            branches,
        };
        q.validate()?;
        Ok(q)
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn json_lines<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(line).map_err(|e| CliError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

/// Reads one query object or a JSON-lines file of them.
pub fn read_queries(path: &Path) -> Result<Vec<(ConjunctiveQuery, Option<String>)>> {
    let text = read_text(path)?;
    let items: Vec<QueryJson> = match serde_json::from_str::<QueryJson>(&text) {
        Ok(q) => vec![q],
        Err(_) => json_lines(path, &text)?,
    };
    if items.is_empty() {
        return Err(CliError::Format(format!("{}: no queries", path.display())));
    }
    items
        .into_iter()
        .map(|q| {
            let t = q.query_type.clone();
            Ok((q.into_query()?, t))
        })
        .collect()
}

pub fn read_query(path: &Path) -> Result<ConjunctiveQuery> {
    let mut qs = read_queries(path)?;
    if qs.len() != 1 {
        return Err(CliError::Format(format!("{}: expected one query, found {}", path.display(), qs.len())));
    }
    Ok(qs.remove(0).0)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerLine {
    pub id: String,
    #[serde(rename = "type")]
    pub query_type: String,
    pub easy: Vec<String>,
    pub hard: Vec<String>,
}

pub const QUERIES_FILE: &str = "queries.jsonl";
pub const ANSWERS_FILE: &str = "answers.jsonl";

fn names(set: &AnswerSet, g: &KnowledgeGraph) -> Vec<String> {
    set.iter().map(|e| g.entity_name(e).unwrap_or_default().to_owned()).collect()
}

fn resolve(names: &[String], g: &KnowledgeGraph) -> Result<AnswerSet> {
    names
        .iter()
        .map(|n| {
            g.entity_id(n)
                .ok_or_else(|| CliError::Core(CoreError::Binding(format!("answer entity {n:?} not in the graph dictionary"))))
        })
        .collect()
}

/// Writes `queries.jsonl` and `answers.jsonl` into `dir`, line for line.
pub fn write_workload(dir: &Path, batch: &[LabeledQuery], g: &KnowledgeGraph) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let write = |file: &str, lines: Vec<String>| -> Result<()> {
        let path = dir.join(file);
        let f = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(f);
        for line in lines {
            writeln!(w, "{line}").map_err(|e| CliError::io(&path, e))?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))
    };
    let queries: Vec<String> = batch
        .iter()
        .map(|q| to_json(&QueryJson::from_query(&q.query, Some(q.query_type.name()))))
        .collect::<Result<_>>()?;
    let answers: Vec<String> = batch
        .iter()
        .map(|q| {
            to_json(&AnswerLine {
                id: q.id().to_owned(),
                query_type: q.query_type.name().to_owned(),
                easy: names(&q.easy, g),
                hard: names(&q.hard, g),
            })
        })
        .collect::<Result<_>>()?;
    write(QUERIES_FILE, queries)?;
    write(ANSWERS_FILE, answers)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| CliError::Internal(e.to_string()))
}

/// Reads a labeled workload back, resolving answer names against `g`.
pub fn read_workload(dir: &Path, g: &KnowledgeGraph) -> Result<Vec<LabeledQuery>> {
    let qpath = dir.join(QUERIES_FILE);
    let apath = dir.join(ANSWERS_FILE);
    for p in [&qpath, &apath] {
        if !p.is_file() {
            return Err(CliError::Format(format!("missing workload file {}", p.display())));
        }
    }
    let queries: Vec<QueryJson> = json_lines(&qpath, &read_text(&qpath)?)?;
    let answers: Vec<AnswerLine> = json_lines(&apath, &read_text(&apath)?)?;
    if queries.len() != answers.len() {
        return Err(CliError::Format(format!(
            "{} has {} queries but {} has {} answer lines",
            qpath.display(),
            queries.len(),
            apath.display(),
            answers.len()
        )));
    }
    queries
        .into_iter()
        .zip(answers)
        .enumerate()
        .map(|(i, (q, a))| {
            if q.id.as_deref() != Some(a.id.as_str()) {
                return Err(CliError::Format(format!("line {}: query id {:?} does not match answer id {:?}", i + 1, q.id, a.id)));
            }
            let query_type: QueryType = a
                .query_type
                .parse()
                .map_err(|_| CliError::Format(format!("line {}: unknown query type {:?}", i + 1, a.query_type)))?;
            Ok(LabeledQuery {
                query: q.into_query()?,
                query_type,
                easy: resolve(&a.easy, g)?,
                hard: resolve(&a.hard, g)?,
            })
        })
        .collect()
}

fn steps_signature(steps: &[Step]) -> String {
    steps.iter().map(Step::signature).collect::<Vec<_>>().join(".")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstantLeafJson {
    pub atom: usize,
    pub constant: String,
    pub path: String,
}

/// Unraveling variables and constant leaves to their step sequences.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceJson {
    pub depth: usize,
    pub variables: BTreeMap<String, String>,
    pub constant_leaves: Vec<ConstantLeafJson>,
}

impl ProvenanceJson {
    pub fn of(u: &UnravelResult) -> Self {
        ProvenanceJson {
            depth: u.depth,
            variables: u
                .provenance
                .variables
                .iter()
                .map(|(name, p)| (name.clone(), p.signature()))
                .collect(),
            constant_leaves: u
                .provenance
                .constant_leaves
                .iter()
                .map(|l| ConstantLeafJson {
                    atom: l.atom,
                    constant: l.constant.clone(),
                    path: steps_signature(&l.path.steps),
                })
                .collect(),
        }
    }
}

/// Witness as `{"var": "image"}`; constants are fixed and left out.
pub fn witness_json(h: &Homomorphism) -> BTreeMap<String, String> {
    h.iter()
        .filter(|(src, _)| src.is_var())
        .map(|(src, dst)| (src.name().to_owned(), dst.name().to_owned()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn query_round_trip() {
        let q = ConjunctiveQuery::new(
            "x",
            vec![
                Atom::new("Friend", Term::var("y"), Term::var("x")),
                Atom::negated("Coworker", Term::constant("a"), Term::var("y")),
                Atom::new("Coworker", Term::constant("b"), Term::var("y")),
            ],
        )
        .with_id("q1");
        let j = QueryJson::from_query(&q, Some("pin"));
        let text = serde_json::to_string(&j).unwrap();
        assert!(text.contains(r#"{"const":"a"}"#));
        let back: QueryJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.into_query().unwrap(), q);
    }

    #[test]
    fn union_uses_branches() {
        let a = |r: &str| vec![Atom::new(r, Term::constant("c"), Term::var("x"))];
        let q = ConjunctiveQuery::union("x", vec![a("r"), a("s")]);
        let j = QueryJson::from_query(&q, None);
        assert!(j.atoms.is_none());
        assert_eq!(j.into_query().unwrap(), q);
    }

    #[test]
    fn rejects_ambiguous_shape() {
        let text = r#"{"target":"x"}"#;
        let j: QueryJson = serde_json::from_str(text).unwrap();
        assert!(j.into_query().is_err());
        let bad = r#"{"target":"x","atoms":[{"rel":"r","s":"x","o":"y","extra":1}]}"#;
        assert!(serde_json::from_str::<QueryJson>(bad).is_err());
    }
}
