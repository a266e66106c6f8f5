//! Decision support for a sequential bomb-defusal task: an optimal expert
//! policy, counterfactual explanations, an online Bayesian-network model of
//! the human's decision rule, gated interventions, simulated participants
//! and an experiment harness.

pub mod engine;
pub mod error;
pub mod harness;
pub mod exec;
pub mod human;
pub mod intervention;
pub mod policy;
pub mod task;
pub mod tom;
pub mod xrl;

pub use error::{Error, Result};
pub use exec::Execution;
