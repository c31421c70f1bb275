use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("{kind} id {index} out of range (size {len})")]
    IndexOutOfRange {
        kind: &'static str,
        index: usize,
        len: usize,
    },
    #[error("unsupported query shape: {0}")]
    UnsupportedShape(String),
    #[error("query graph is disconnected")]
    Disconnected,
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("binding error: {0}")]
    Binding(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("depth {depth} exceeds the safety limit {limit}")]
    DepthLimit { depth: usize, limit: usize },
    #[error("training diverged at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("could not instantiate {shape} after {attempts} attempts")]
    Exhausted { shape: String, attempts: usize },
    #[error("predictor error: {0}")]
    Predictor(String),
    #[error("empty input")]
    EmptyInput,
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),
}
