//! Tab-separated triple files and dictionary export.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use unravel_core::{GraphBuilder, KnowledgeGraph};

use crate::error::{CliError, Result};

/// Appends the triples of `reader` to `builder`. Blank lines are skipped.
pub fn read_triples<R: BufRead>(reader: R, path: &Path, builder: &mut GraphBuilder) -> Result<usize> {
    let mut count = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected head<TAB>relation<TAB>tail, found {} field(s)", fields.len()),
            });
        }
        builder.add(fields[0], fields[1], fields[2]);
        count += 1;
    }
    Ok(count)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

pub fn load_graph(path: &Path) -> Result<KnowledgeGraph> {
    let mut b = GraphBuilder::new();
    read_triples(open(path)?, path, &mut b)?;
    b.build().map_err(|e| CliError::Format(format!("{}: {e}", path.display())))
}

/// Loads a train split and the full graph. The full edge set is the union
/// of both files, and both graphs share one dictionary (train names first).
pub fn load_pair(train: &Path, full: &Path) -> Result<(KnowledgeGraph, KnowledgeGraph)> {
    let train_g = load_graph(train)?;
    let mut b = GraphBuilder::from_graph(&train_g);
    read_triples(open(full)?, full, &mut b)?;
    let full_g = b.build()?;
    let train_g = full_g.with_edges(train_g.edges().iter().copied())?;
    Ok((train_g, full_g))
}

/// A graph plus, optionally, extra files merged into its dictionary only.
/// Used when a model or workload was built over a train/full pair.
pub fn load_with_dictionary(graph: &Path, extra: Option<&Path>) -> Result<KnowledgeGraph> {
    match extra {
        None => load_graph(graph),
        Some(full) => Ok(load_pair(graph, full)?.0),
    }
}

pub fn write_graph(g: &KnowledgeGraph, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for t in g.edges() {
        let h = g.entity_name(t.head).unwrap_or_default();
        let r = g.relation_name(t.relation).unwrap_or_default();
        let o = g.entity_name(t.tail).unwrap_or_default();
        writeln!(w, "{h}\t{r}\t{o}").map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictionaryExport {
    pub entities: Vec<String>,
    pub relations: Vec<String>,
}

impl DictionaryExport {
    pub fn of(g: &KnowledgeGraph) -> Self {
        DictionaryExport {
            entities: g.entities().names().to_vec(),
            relations: g.relations().names().to_vec(),
        }
    }

    /// FNV-1a over both name lists; stored in model files to catch
    /// mismatched dictionaries.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for (tag, names) in [(b'E', &self.entities), (b'R', &self.relations)] {
            for name in names {
                for &byte in std::iter::once(&tag).chain(name.as_bytes()).chain(&[0u8]) {
                    h ^= byte as u64;
                    h = h.wrapping_mul(0x0100_0000_01b3);
                }
            }
        }
        format!("{h:016x}")
    }
}
