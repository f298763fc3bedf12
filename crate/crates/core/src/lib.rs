//! Individual node threshold estimation for the Linear Threshold Model.
//!
//! Thresholds are estimated as *triggers*: the activation-influence level
//! that maximizes the difference in activation rates above and below it.
//! Two trigger estimators are provided (a trigger-based causal tree and the
//! ST-Learner meta-learner) alongside the usual baselines, a diffusion
//! engine, synthetic data generators and an evaluation harness.

pub mod baselines;
pub mod causal_tree;
pub mod config;
pub mod datasets;
pub mod error;
pub mod experiment;
pub mod learners;
pub mod ltm;
pub mod metrics;
pub mod network;
pub mod oracle;
pub mod st_learner;
pub mod synthgen;
mod trigger;

pub use error::{Error, Result};
pub use ltm::DiffusionTrace;
pub use network::{Graph, NodeId, NodeSet};
