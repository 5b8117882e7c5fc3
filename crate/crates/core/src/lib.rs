//! Temporal frame subsampling that meets a target duration exactly while
//! following per-frame slowness likelihoods or arbitrary re-timing signals.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` / `*32` aliases below fix the scalar type for common use.

// `!(x > 0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adam;
pub mod baselines;
pub mod error;
pub mod eval;
pub mod interp;
pub mod io;
pub mod model_math;
pub mod optimizer;
pub mod scalar;
pub mod signals;
pub mod synth;

pub use baselines::{speednet_retime, speednet_sweep, uniform_retime, SpeedupConfig, SpeedupField};
pub use error::{Result, RetimeError};
pub use eval::{evaluate_case, mae, run_suite, ExperimentReport, Method, SuiteConfig};
pub use model_math::{class_weights, temporal_difference_concat, weighted_ce_loss, ActivationBlock};
pub use optimizer::{
    optimize, to_frame_indices, total_loss_and_gradient, Guide, IndexGradient, LossTerms, RetimeConfig, RetimeResult,
    SignalStrength, SkipSequence,
};
pub use scalar::Scalar;
pub use signals::{Orientation, RetimeSignal, SlownessMatrix};
pub use synth::{CaseRecord, GroundTruthCase};

pub type SlownessMatrix64 = SlownessMatrix<f64>;
pub type SlownessMatrix32 = SlownessMatrix<f32>;
pub type RetimeSignal64 = RetimeSignal<f64>;
pub type RetimeSignal32 = RetimeSignal<f32>;
pub type RetimeConfig64 = RetimeConfig<f64>;
pub type RetimeConfig32 = RetimeConfig<f32>;
pub type RetimeResult64 = RetimeResult<f64>;
pub type RetimeResult32 = RetimeResult<f32>;
pub type SkipSequence64 = SkipSequence<f64>;
pub type GroundTruthCase64 = GroundTruthCase<f64>;
