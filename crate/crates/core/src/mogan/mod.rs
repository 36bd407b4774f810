//! Compound-graph effect prediction: graph construction, the three effect
//! networks, the padded feed-forward baseline and their training loops.

pub mod baseline;
pub mod graph;
pub mod model;
pub mod train;

pub use baseline::{BaselineConfig, BaselineModel, MAX_OBJECTS};
pub use graph::{build_graph, edge_creation, CompoundGraph, NodeInfo};
pub use model::{CandidatePrediction, FeatureScaler, Head, HeadNet, MoganConfig, MoganModel};
pub use train::{
    evaluate_baseline, evaluate_mogan, prepare_samples, train_baseline, train_mogan, EpochLoss, LrUnit, MetricsAccumulator,
    Sample, SizeMetrics, TrainConfig,
};
