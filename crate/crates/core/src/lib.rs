//! Dynamic discounted satisficing (DDS) driver model.
//!
//! A driver accepts rides until the accumulated utility of the day reaches a
//! threshold that decays geometrically within the day. The initial target
//! `lambda` and the discount `beta` drift across days through noisy linear
//! recurrences followed by projections. This crate holds the pure pieces:
//!
//! - [`model`]: projection, latent recurrences, stopping rule, decision probability
//!   and the day-by-day simulator of a driver history.
//! - [`gradient`]: noise-conditioned forward pass, BCE loss and exact reverse-mode
//!   gradients through the day recurrences, with a finite-difference oracle.
//! - [`trainer`]: sampled backpropagation through time, evaluation metrics,
//!   stop prediction and the discounted-satisficing baseline.
//! - [`simulator`]: exponential ride utilities and DDS-labelled synthetic drivers.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, CSV ingestion and
//! the command line live in the `dds` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod gradient;
mod math;
pub mod model;
pub mod noise;
pub mod params;
pub mod simulator;
pub mod trainer;

pub use error::{Error, Result};
pub use gradient::{
    backward, bce_loss, finite_diff_gradients, forward, forward_scoped, DayTrace, ForwardTrace,
    Gradients, LossConfig, LossScope, MaskMode,
};
pub use model::{
    continues, decision_probability, project, rollout, simulate_history, stopping_task, threshold,
    update_beta, update_lambda, Activation, DaySequence, DriverHistory, LatentState,
    LatentTrajectory, ModelConfig, ModelKind, Projected, UtilityFeedback,
};
pub use noise::NoiseDraw;
pub use params::BehaviorParams;
pub use simulator::{generate_driver, generate_utilities, SimConfig, SyntheticDriver};
pub use trainer::{
    averaged_gradient, evaluate, predict_stop, sbptt_train, train_ds_baseline, EpochRecord,
    SplitMetrics, TrainConfig, TrainData, TrainReport, UpdateMode,
};
