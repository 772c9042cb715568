//! Template-composition GFlowNet for single-step retrosynthesis.

pub mod autodiff;
pub mod env;
pub mod molgraph;
pub mod policy;
pub mod templates;
pub mod train;
pub mod econ;
pub mod eval;
pub mod feasibility;
pub mod corpus;
pub mod pipeline;
pub mod selfcheck;
