//! Model files: the magic `BLMODEL1`, a little-endian `u32` header length,
//! a JSON header, then the entity and relation matrices as row-major
//! little-endian `f32`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unravel_core::embed::{BilinearModel, Optimizer, TrainConfig};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 8] = b"BLMODEL1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfigJson {
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub negatives: usize,
    pub seed: u64,
    pub optimizer: String,
    pub init_scale: f64,
    pub l2: f64,
}

impl From<&TrainConfig> for TrainConfigJson {
    fn from(c: &TrainConfig) -> Self {
        TrainConfigJson {
            dim: c.dim,
            epochs: c.epochs,
            learning_rate: c.learning_rate,
            negatives: c.negatives,
            seed: c.seed,
            optimizer: optimizer_name(c.optimizer).into(),
            init_scale: c.init_scale,
            l2: c.l2,
        }
    }
}

pub fn optimizer_name(o: Optimizer) -> &'static str {
    match o {
        Optimizer::Sgd => "sgd",
        Optimizer::Adam => "adam",
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub dim: usize,
    pub num_entities: usize,
    pub num_relations: usize,
    /// Fingerprint of the dictionaries the model was trained over.
    pub dictionary: String,
    pub config: TrainConfigJson,
}

pub fn encode(model: &BilinearModel, header: &ModelHeader) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header).map_err(|e| CliError::Internal(e.to_string()))?;
    let floats = model.entity_matrix().len() + model.relation_matrix().len();
    let mut out = Vec::with_capacity(12 + json.len() + 4 * floats);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for &x in model.entity_matrix().iter().chain(model.relation_matrix()) {
        out.extend_from_slice(&(x as f32).to_le_bytes());
    }
    Ok(out)
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Format(format!("model file: {}", msg.into()))
}

pub fn decode(bytes: &[u8]) -> Result<(BilinearModel, ModelHeader)> {
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(bad("missing BLMODEL1 magic"));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = bytes.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: ModelHeader = serde_json::from_slice(body).map_err(|e| bad(e.to_string()))?;
    let rest = &bytes[12 + hlen..];
    let ne = header.num_entities * header.dim;
    let nr = header.num_relations * header.dim;
    if rest.len() != 4 * (ne + nr) {
        return Err(bad(format!("expected {} matrix bytes, found {}", 4 * (ne + nr), rest.len())));
    }
    let floats: Vec<f64> = rest
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    if floats.iter().any(|x| !x.is_finite()) {
        return Err(bad("non-finite parameter"));
    }
    let rels = floats[ne..].to_vec();
    let mut ents = floats;
    ents.truncate(ne);
    let model = BilinearModel::from_parts(header.dim, ents, rels)?;
    Ok((model, header))
}

pub fn save(path: &Path, model: &BilinearModel, header: &ModelHeader) -> Result<()> {
    fs::write(path, encode(model, header)?).map_err(|e| CliError::io(path, e))
}

pub fn load(path: &Path) -> Result<(BilinearModel, ModelHeader)> {
    decode(&fs::read(path).map_err(|e| CliError::io(path, e))?)
}
