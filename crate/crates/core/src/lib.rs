//! Streaming gait analysis for an instrumented knee-ankle-foot orthosis.
//!
//! Frames from a 15-channel plantar pressure insole and a foot-mounted IMU go
//! through conditioning, gait event detection and orientation/position fusion.
//! The results feed per-cycle gait parameters, overload and rotation feedback,
//! and a binary telemetry format. A seeded simulator supplies trials with exact
//! ground truth.
//!
//! ```
//! use gaitcore::{analyze, synthesize_trial, EngineConfig, SimProfile};
//!
//! let (frames, truth) = synthesize_trial(&SimProfile::default(), 42).unwrap();
//! let analysis = analyze(&frames, &EngineConfig::default()).unwrap();
//! assert_eq!(analysis.report.summary.cycles, truth.cycles.len());
//! ```

// `!(x > 0.0)` style checks are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use thiserror::Error;

pub mod config;
pub mod events;
pub mod feedback;
pub mod fusion;
pub mod heatmap;
pub mod params;
pub mod pipeline;
pub mod signal;
pub mod sim;
pub mod telemetry;
pub mod turbo;
pub mod types;
pub mod validation;

pub use config::{ConfigError, EngineConfig};
pub use events::{GaitEvent, GaitEventKind, Phase, ThresholdConfig};
pub use feedback::{ActuatorTarget, FeedbackConfig, FeedbackMode, OverloadAlert, VibrationCommand};
pub use fusion::{FusionConfig, TrajectoryPoint};
pub use heatmap::{HeatmapConfig, HeatmapGrid, Splatter};
pub use params::{GaitCycleRecord, GaitReport, ReportConfig, TrialSummary};
pub use pipeline::{analyze, run_stream, Analysis, Engine, StepOutput, TrialStream};
pub use signal::{ConditioningConfig, ForceFrame, ImuFrame, KalmanParams};
pub use sim::{inject_overload, synthesize_trial, GroundTruth, SimProfile};
pub use telemetry::{trial_fingerprint, TelemetryError};
pub use types::{CalibrationProfile, Region, RegionMap, SensorFrame, FSR_CHANNELS};
pub use validation::{AccuracySummary, TrialComparison};

/// Any failure surfaced by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Frame(#[from] types::FrameError),
    #[error(transparent)]
    Calibration(#[from] types::CalibrationError),
    #[error(transparent)]
    Signal(#[from] signal::SignalError),
    #[error(transparent)]
    Event(#[from] events::EventError),
    #[error(transparent)]
    Fusion(#[from] fusion::FusionError),
    #[error(transparent)]
    Params(#[from] params::ParamsError),
    #[error(transparent)]
    Feedback(#[from] feedback::FeedbackError),
    #[error(transparent)]
    Heatmap(#[from] heatmap::HeatmapError),
    #[error(transparent)]
    Telemetry(#[from] telemetry::TelemetryError),
    #[error(transparent)]
    Sim(#[from] sim::SimError),
    #[error(transparent)]
    Validation(#[from] validation::ValidationError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
}
