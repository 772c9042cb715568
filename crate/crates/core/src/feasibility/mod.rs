//! Feasibility proxies: a rule-based forward model, negative reactions, the
//! challenging acceptance set and a trainable feasibility classifier.

mod challenging;
mod forward;
mod negatives;
mod rfm;

pub use challenging::{acceptance_accuracy, challenging_set, wilson_interval, AcceptanceReport, ChallengeGroup, GROUP_SIZE};
pub use forward::{parse_reactant_key, ForwardModel, ForwardProduct};
pub use negatives::{generate_negatives, read_negatives, write_negatives, Negative, NegativeMethod, NegativeSet};
pub use rfm::{auc, train_rfm, Rfm, RfmConfig, RfmInput, RfmReport};

use crate::autodiff::AutodiffError;

#[derive(Debug, thiserror::Error)]
pub enum FeasibilityError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error("not enough material: {0}")]
    Insufficient(String),
}
