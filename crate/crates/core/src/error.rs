use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot place onto a collapsed compound")]
    PlacementOnCollapsed,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("aggregation over an empty graph")]
    EmptyGraph,
    #[error("compound is empty")]
    EmptyCompound,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("model not loaded")]
    ModelNotLoaded,
    #[error("query index {index} out of range for compound of size {size}")]
    BadQueryIndex { index: usize, size: usize },
    #[error("compound of size {0} exceeds the padded input of 14")]
    CompoundTooLarge(usize),
    #[error("no feasible plan")]
    NoFeasiblePlan,
    #[error("non-finite loss at epoch {0}")]
    NonFiniteLoss(usize),
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("bad snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
