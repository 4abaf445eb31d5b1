//! The binary real-vs-constructed classifier over embedder features.

mod metrics;
mod model;
mod probe;
mod train;

pub use metrics::{average_precision, evaluate, MetricsReport, THRESHOLD};
pub use model::{gradient, loss, Architecture, DetectorModel, Label, Standardizer, HIDDEN, PROB_FLOOR};
pub use probe::{pair_gradients, synthetic_pairs, GradientPairs, variance_probe, variance_probe_gradients, VarianceReport, MIN_TRIALS};
pub use train::{train, Mode, TrainConfig, TrainOutcome};
