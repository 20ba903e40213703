//! Frame-by-frame engine and batch trial analysis.

use crate::config::EngineConfig;
use crate::events::{EventDetector, GaitEvent, GaitEventKind, Phase};
use crate::feedback::{FeedbackEngine, OverloadAlert, VibrationCommand};
use crate::fusion::{MotionTracker, TrajectoryPoint};
use crate::params::{build_report, GaitReport};
use crate::signal::{estimate_imu_bias, Conditioner, ForceFrame, ImuFrame};
use crate::telemetry::trial_fingerprint;
use crate::types::{validate_frame, SensorFrame};
use crate::Error;

/// Everything the engine derives from one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    /// Filtered, baseline-corrected forces.
    pub force: ForceFrame,
    pub imu: ImuFrame,
    pub phase: Phase,
    pub event: Option<GaitEvent>,
    pub point: TrajectoryPoint,
    pub alerts: Vec<OverloadAlert>,
    pub commands: Vec<VibrationCommand>,
}

pub struct Engine {
    conditioner: Conditioner,
    detector: EventDetector,
    tracker: MotionTracker,
    feedback: FeedbackEngine,
    prev_timestamp: Option<u64>,
    reference_yaw: Option<f64>,
}

impl Engine {
    pub fn new(cfg: &EngineConfig) -> Result<Self, Error> {
        cfg.validate()?;
        let bw = cfg.calibration.body_weight_n;
        Ok(Self {
            conditioner: Conditioner::new(&cfg.calibration, &cfg.conditioning, &cfg.region_map)?,
            detector: EventDetector::new(&cfg.thresholds, bw, &cfg.region_map)?,
            tracker: MotionTracker::new(&cfg.fusion)?,
            feedback: FeedbackEngine::new(&cfg.feedback, bw)?,
            prev_timestamp: None,
            reference_yaw: None,
        })
    }

    pub fn process(&mut self, frame: &SensorFrame) -> Result<StepOutput, Error> {
        validate_frame(frame, self.prev_timestamp)?;
        self.prev_timestamp = Some(frame.timestamp_ms);
        let (force, imu) = self.conditioner.condition_frame(frame)?;
        let detected = self.detector.process(&force);
        let point = self.tracker.step(&imu, detected.phase.is_foot_stationary())?;

        let mut alerts = Vec::new();
        if let Some(a) = self.feedback.evaluate_overload(&detected.corrected, detected.phase) {
            alerts.push(a);
        }
        // Heading drift is judged once per cycle, with the foot flat on the ground.
        if matches!(detected.event, Some(e) if e.kind == GaitEventKind::FootFlat) {
            let yaw = point.yaw.to_degrees();
            let reference = *self.reference_yaw.get_or_insert(yaw);
            let deviation = (yaw - reference + 180.0).rem_euclid(360.0) - 180.0;
            if let Some(a) = self.feedback.evaluate_rotation(frame.timestamp_ms, deviation) {
                alerts.push(a);
            }
        }
        let commands = alerts.iter().flat_map(|a| self.feedback.commands_for(a)).collect();

        Ok(StepOutput {
            force: detected.corrected,
            imu,
            phase: detected.phase,
            event: detected.event,
            point,
            alerts,
            commands,
        })
    }
}

/// Per-frame results of a whole trial.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialStream {
    pub forces: Vec<ForceFrame>,
    pub imu: Vec<ImuFrame>,
    pub phases: Vec<Phase>,
    pub events: Vec<GaitEvent>,
    pub trajectory: Vec<TrajectoryPoint>,
    pub alerts: Vec<OverloadAlert>,
    pub commands: Vec<VibrationCommand>,
}

/// Static IMU offsets from the leading still frames, when enabled and the
/// window really is still. Otherwise the configured calibration is kept.
pub fn calibrated_config(frames: &[SensorFrame], cfg: &EngineConfig) -> EngineConfig {
    let mut cfg = cfg.clone();
    let n = cfg.bias_estimation.frames;
    if cfg.bias_estimation.enabled && frames.len() >= n {
        let estimate = estimate_imu_bias(
            &frames[..n],
            cfg.conditioning.gravity_axis,
            cfg.conditioning.motion_threshold_rad_s,
        );
        if let Ok(bias) = estimate {
            cfg.calibration.accel_bias = bias.accel;
            cfg.calibration.gyro_bias = bias.gyro;
        }
    }
    cfg
}

pub fn run_stream(frames: &[SensorFrame], cfg: &EngineConfig) -> Result<TrialStream, Error> {
    let cfg = calibrated_config(frames, cfg);
    let mut engine = Engine::new(&cfg)?;
    let mut out = TrialStream::default();
    for frame in frames {
        let step = engine.process(frame)?;
        out.forces.push(step.force);
        out.imu.push(step.imu);
        out.phases.push(step.phase);
        out.events.extend(step.event);
        out.trajectory.push(step.point);
        out.alerts.extend(step.alerts);
        out.commands.extend(step.commands);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub stream: TrialStream,
    pub report: GaitReport,
}

/// Full batch analysis; the report's trial id is the frames' fingerprint.
pub fn analyze(frames: &[SensorFrame], cfg: &EngineConfig) -> Result<Analysis, Error> {
    let stream = run_stream(frames, cfg)?;
    let mut report_cfg = cfg.report.clone();
    report_cfg.pressure_min_load_n = Some(cfg.pressure_min_load_n());
    let mut report = build_report(&stream.forces, &stream.events, &stream.trajectory, &report_cfg)?;
    report.trial_id = trial_fingerprint(frames);
    report.metadata.config = serde_json::to_value(cfg).unwrap_or_default();
    Ok(Analysis { stream, report })
}
