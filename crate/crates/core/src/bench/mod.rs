//! Benchmark laboratory: synthetic corpora, corpus ingestion, metrics and runners.

pub mod generators;
pub mod ingest;
pub mod metrics;
pub mod runner;

use serde::{Deserialize, Serialize};

use crate::data::SamplePair;
use crate::inference::Direction;

pub use generators::{corpus, generate, generate_with_truth, sinusoid_truth, Family, GeneratorSpec};
pub use ingest::{ingest_pairs, CorpusFormat, IngestedCorpus};
pub use metrics::{audrc, gaussian_kl, grid_kl, DecisionRateCurve, GridKl, KlOrientation, VerdictRecord};
pub use runner::{
    run_benchmark, run_estimator_bench, BenchmarkConfig, BenchmarkReport, EstimatorBenchConfig, EstimatorBenchReport,
    KnotRule, REPORT_SCHEMA_VERSION,
};

/// A sample pair with its ground-truth causal direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub pair: SamplePair,
    pub true_direction: Direction,
    pub dataset: String,
    pub pair_id: String,
    /// Metadata weight; 1 unless the corpus supplies one.
    pub weight: f64,
}

impl LabeledPair {
    /// Swap the variables together with the ground truth.
    pub fn flipped(&self) -> Self {
        Self { pair: self.pair.swapped(), true_direction: self.true_direction.flipped(), ..self.clone() }
    }
}
