//! Ranked-list truncation for retrieve-then-re-rank pipelines.
//!
//! Runs and judgments are loaded with [`corpus`], scored with [`metrics`],
//! and re-ranking at every cut-off is simulated by [`sim`]. [`eet`] turns
//! the resulting sweep into trade-off targets, [`truncate`] holds the
//! unsupervised cut-off methods and [`features`] exports inputs for
//! supervised ones.

pub mod corpus;
pub mod eet;
pub mod features;
pub mod metrics;
pub mod sim;
pub mod stats;
pub mod synth;
pub mod truncate;

pub use corpus::{QrelsSet, RankedItem, RankedList, RerankPair, RunSet};
pub use eet::{EetConfig, TargetVector};
pub use metrics::{MetricId, MetricKind};
pub use sim::{CostModel, SweepMatrix, TruncationPrediction};
