//! Collapsed Gibbs sampling of the topic assignments, Metropolis-Hastings
//! updates of the per-document priors, the training loop and test-time
//! inference.

mod gibbs;
mod mh;
mod state;
mod train;

pub use gibbs::{GibbsModel, TimeParams};
pub use mh::{mh_log_acceptance, mh_update_priors};
pub use state::{AssignState, DocState};
pub use train::{
    infer_doc, train, DocInference, InferOptions, InferenceModel, TraceStats, TrainOutput,
};
