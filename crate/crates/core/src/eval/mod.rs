//! Inference-time ranking and the evaluation metrics.

mod infer;
mod metrics;

pub use infer::{estimate_terminal_probs, infer, InferConfig, Prediction, RankedPredictions, MAX_PREDICTIONS};
pub use metrics::{
    filter_ablation, ftc, missing_products, mrr, reactant_scaffolds, round_trip, scaffold_diversity, topk_accuracy,
    GroundTruth, MetricsReport, K_GRID,
};

use crate::env::EnvError;
use crate::policy::PolicyError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("invalid inference configuration: {0}")]
    Config(String),
}
