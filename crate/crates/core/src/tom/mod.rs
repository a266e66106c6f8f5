//! Theory-of-Mind model: a Bayesian network over the three observations and
//! the human's action, learned online from a moving observation window.

mod cpd;
mod dag;
mod model;
mod score;
mod search;

pub use cpd::{bayesian_update, fit_mle, Cpds, NodeCpd};
pub use dag::{ConstraintSet, Dag, Edge, Node, Observation, N_NODES};
pub use model::{tom_step, update_threshold, PredictionRecord, TomConfig, TomModel, TomSnapshot, TomStepReport};
pub use score::{bdeu_score, local_bdeu};
pub use search::{hill_climb, SCORE_TIE_EPS};
