//! Model parameters, probability kernels, moment estimators and the
//! forward-sampling generator.

mod checkpoint;
mod config;
mod counts;
mod generate;
mod kernels;
mod moments;
mod prior;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use config::{CatmConfig, ObjectMode, Preset, PriorMode, TimeMode};
pub use counts::CountTables;
pub use generate::{
    ablate_interior_segment, generate, synth_features, FeatureSynthOptions, ForgottenTruth,
    GroundTruth, SyntheticOptions, TrueParams,
};
pub use kernels::{
    cross_inverse, cross_transform, log_logistic, log_stick_breaking, logistic, reltime_pdf,
    same_inverse, same_transform, stick_breaking, AbsTimeParams, PairTime, RelTimeParams,
};
pub use moments::{
    doc_time_log_lik, estimate_abs_time, estimate_reltime_moments, segment_ids, DocGaps,
};
pub use prior::{estimate_prior_moments, training_ridge, GlobalPrior, PriorSampler};

pub(crate) use moments::RelTimeAccumulator;
