//! Haptic feedback: overload alerts, rotation-dependent intensity and
//! vibration patterns for the orthosis and crutch actuators.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::Phase;
use crate::signal::ForceFrame;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeedbackError {
    #[error("invalid feedback configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeedbackMode {
    Continuous,
    PulsedPattern,
}

impl FeedbackMode {
    pub fn code(self) -> u8 {
        match self {
            Self::Continuous => 0,
            Self::PulsedPattern => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Self::Continuous),
            1 => Some(Self::PulsedPattern),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActuatorTarget {
    OrthosisActuator,
    CrutchActuator1,
    CrutchActuator2,
}

impl ActuatorTarget {
    pub fn code(self) -> u8 {
        match self {
            Self::OrthosisActuator => 0,
            Self::CrutchActuator1 => 1,
            Self::CrutchActuator2 => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Self::OrthosisActuator),
            1 => Some(Self::CrutchActuator1),
            2 => Some(Self::CrutchActuator2),
            _ => None,
        }
    }
}

impl fmt::Display for ActuatorTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::OrthosisActuator => "orthosis",
            Self::CrutchActuator1 => "crutch-1",
            Self::CrutchActuator2 => "crutch-2",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlertSource {
    StanceOverload,
    RotationAnomaly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeedbackConfig {
    pub overload_factor: f64,
    /// `None` uses the body weight.
    pub expected_load: Option<f64>,
    pub mode: FeedbackMode,
    pub pulse_on_ms: u32,
    pub pulse_off_ms: u32,
    /// Total length of one vibration command.
    pub command_duration_ms: u32,
    pub base_intensity: f64,
    pub rotation_threshold_deg: f64,
    /// Intensity added per degree beyond the threshold.
    pub rotation_gain: f64,
    pub alert_cooldown_ms: u64,
    /// Actuators that receive a command for each overload alert.
    pub overload_targets: Vec<ActuatorTarget>,
    pub rotation_targets: Vec<ActuatorTarget>,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            overload_factor: 1.20,
            expected_load: None,
            mode: FeedbackMode::Continuous,
            pulse_on_ms: 200,
            pulse_off_ms: 200,
            command_duration_ms: 1000,
            base_intensity: 0.8,
            rotation_threshold_deg: 10.0,
            rotation_gain: 0.02,
            alert_cooldown_ms: 1000,
            overload_targets: vec![ActuatorTarget::CrutchActuator1],
            rotation_targets: vec![ActuatorTarget::OrthosisActuator],
        }
    }
}

impl FeedbackConfig {
    pub fn validate(&self) -> Result<(), FeedbackError> {
        let bad = |m: &str| Err(FeedbackError::InvalidConfig(m.into()));
        if !(self.overload_factor > 1.0) {
            return bad("overload_factor must be > 1");
        }
        if matches!(self.expected_load, Some(l) if !(l > 0.0)) {
            return bad("expected_load must be > 0");
        }
        if self.pulse_on_ms == 0 || self.pulse_off_ms == 0 || self.command_duration_ms == 0 {
            return bad("pulse and command durations must be > 0");
        }
        if !(0.0..=1.0).contains(&self.base_intensity) {
            return bad("base_intensity must be in [0, 1]");
        }
        if !(self.rotation_threshold_deg >= 0.0) || !(self.rotation_gain >= 0.0) {
            return bad("rotation threshold and gain must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverloadAlert {
    pub timestamp_ms: u64,
    /// Newtons for overloads, degrees of yaw deviation for rotation alerts.
    pub observed_load: f64,
    pub threshold: f64,
    pub source: AlertSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VibrationCommand {
    pub timestamp_ms: u64,
    pub target: ActuatorTarget,
    pub mode: FeedbackMode,
    pub intensity: f64,
    pub pulse_on_ms: u32,
    pub pulse_off_ms: u32,
    pub duration_ms: u32,
}

/// Zero inside the quiet zone, then a linear ramp from `base_intensity`.
pub fn rotation_intensity(yaw_deviation_deg: f64, cfg: &FeedbackConfig) -> f64 {
    let dev = yaw_deviation_deg.abs();
    if dev <= cfg.rotation_threshold_deg {
        return 0.0;
    }
    (cfg.base_intensity + cfg.rotation_gain * (dev - cfg.rotation_threshold_deg)).clamp(0.0, 1.0)
}

pub fn plan_pattern(alert: &OverloadAlert, cfg: &FeedbackConfig, target: ActuatorTarget) -> VibrationCommand {
    let intensity = match alert.source {
        AlertSource::StanceOverload => cfg.base_intensity,
        AlertSource::RotationAnomaly => rotation_intensity(alert.observed_load, cfg),
    };
    let duration = cfg.command_duration_ms;
    let (pulse_on_ms, pulse_off_ms) = match cfg.mode {
        FeedbackMode::Continuous => (duration, duration),
        FeedbackMode::PulsedPattern => (cfg.pulse_on_ms, cfg.pulse_off_ms),
    };
    VibrationCommand {
        timestamp_ms: alert.timestamp_ms,
        target,
        mode: cfg.mode,
        intensity: intensity.clamp(0.0, 1.0),
        pulse_on_ms,
        pulse_off_ms,
        duration_ms: duration,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineSegment {
    pub start_ms: u64,
    pub end_ms: u64,
    pub on: bool,
    pub intensity: f64,
}

/// Expands a command into alternating on/off segments, starting with on.
pub fn render_timeline(cmd: &VibrationCommand) -> Vec<TimelineSegment> {
    let start = cmd.timestamp_ms;
    let end = start + cmd.duration_ms as u64;
    if cmd.mode == FeedbackMode::Continuous {
        return vec![TimelineSegment {
            start_ms: start,
            end_ms: end,
            on: true,
            intensity: cmd.intensity,
        }];
    }
    let mut segments = Vec::new();
    let mut t = start;
    let mut on = true;
    while t < end {
        let len = if on { cmd.pulse_on_ms } else { cmd.pulse_off_ms } as u64;
        let seg_end = (t + len).min(end);
        segments.push(TimelineSegment {
            start_ms: t,
            end_ms: seg_end,
            on,
            intensity: if on { cmd.intensity } else { 0.0 },
        });
        t = seg_end;
        on = !on;
    }
    segments
}

/// Timeline export: `target,start_ms,end_ms,on,intensity`.
pub fn write_timeline_csv<W: Write>(writer: W, commands: &[VibrationCommand]) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["target", "start_ms", "end_ms", "on", "intensity"])?;
    for cmd in commands {
        for s in render_timeline(cmd) {
            out.write_record([
                cmd.target.to_string(),
                s.start_ms.to_string(),
                s.end_ms.to_string(),
                u8::from(s.on).to_string(),
                s.intensity.to_string(),
            ])?;
        }
    }
    out.flush()
}

/// Per-stream feedback context holding the alert cooldowns.
#[derive(Debug, Clone)]
pub struct FeedbackEngine {
    cfg: FeedbackConfig,
    expected_load: f64,
    last_overload_ms: Option<u64>,
    last_rotation_ms: Option<u64>,
}

impl FeedbackEngine {
    pub fn new(cfg: &FeedbackConfig, body_weight: f64) -> Result<Self, FeedbackError> {
        cfg.validate()?;
        let expected_load = cfg.expected_load.unwrap_or(body_weight);
        if !(expected_load > 0.0) {
            return Err(FeedbackError::InvalidConfig("expected load must be > 0".into()));
        }
        Ok(Self {
            cfg: cfg.clone(),
            expected_load,
            last_overload_ms: None,
            last_rotation_ms: None,
        })
    }

    pub fn config(&self) -> &FeedbackConfig {
        &self.cfg
    }

    pub fn overload_threshold(&self) -> f64 {
        self.cfg.overload_factor * self.expected_load
    }

    fn cooled_down(last: Option<u64>, now: u64, cooldown: u64) -> bool {
        last.is_none_or(|t| now.saturating_sub(t) >= cooldown)
    }

    pub fn evaluate_overload(&mut self, frame: &ForceFrame, phase: Phase) -> Option<OverloadAlert> {
        let threshold = self.overload_threshold();
        let now = frame.timestamp_ms;
        if !phase.is_stance()
            || !(frame.total_force > threshold)
            || !Self::cooled_down(self.last_overload_ms, now, self.cfg.alert_cooldown_ms)
        {
            return None;
        }
        self.last_overload_ms = Some(now);
        Some(OverloadAlert {
            timestamp_ms: now,
            observed_load: frame.total_force,
            threshold,
            source: AlertSource::StanceOverload,
        })
    }

    pub fn evaluate_rotation(&mut self, timestamp_ms: u64, yaw_deviation_deg: f64) -> Option<OverloadAlert> {
        let threshold = self.cfg.rotation_threshold_deg;
        if !(yaw_deviation_deg.abs() > threshold)
            || !Self::cooled_down(self.last_rotation_ms, timestamp_ms, self.cfg.alert_cooldown_ms)
        {
            return None;
        }
        self.last_rotation_ms = Some(timestamp_ms);
        Some(OverloadAlert {
            timestamp_ms,
            observed_load: yaw_deviation_deg.abs(),
            threshold,
            source: AlertSource::RotationAnomaly,
        })
    }

    /// One command per configured target for the alert's source.
    pub fn commands_for(&self, alert: &OverloadAlert) -> Vec<VibrationCommand> {
        let targets = match alert.source {
            AlertSource::StanceOverload => &self.cfg.overload_targets,
            AlertSource::RotationAnomaly => &self.cfg.rotation_targets,
        };
        targets.iter().map(|&t| plan_pattern(alert, &self.cfg, t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{RegionMap, FSR_CHANNELS};
    use proptest::prelude::*;

    fn frame(ts: u64, total: f64) -> ForceFrame {
        let mut f = [0.0; FSR_CHANNELS];
        f[7] = total;
        ForceFrame::from_forces(ts, f, &RegionMap::default())
    }

    fn engine() -> FeedbackEngine {
        FeedbackEngine::new(&FeedbackConfig::default(), 100.0).unwrap()
    }

    #[test]
    fn overload_boundary_is_strict() {
        let mut e = engine();
        assert!(e.evaluate_overload(&frame(0, 120.0), Phase::MidStance).is_none());
        let alert = e.evaluate_overload(&frame(10, 125.0), Phase::MidStance).unwrap();
        assert_eq!(alert.source, AlertSource::StanceOverload);
        assert_eq!(alert.threshold, 120.0);
        assert!(alert.observed_load > alert.threshold);
    }

    #[test]
    fn overload_is_stance_gated() {
        let mut e = engine();
        assert!(e.evaluate_overload(&frame(0, 150.0), Phase::Swing).is_none());
    }

    #[test]
    fn cooldown_limits_alerts() {
        let mut e = engine();
        let alerts: Vec<_> = (0..300)
            .filter_map(|i| e.evaluate_overload(&frame(i * 10, 130.0), Phase::MidStance))
            .collect();
        // 3 s of continuous overload with a 1 s cooldown
        assert_eq!(
            alerts.iter().map(|a| a.timestamp_ms).collect::<Vec<_>>(),
            vec![0, 1000, 2000]
        );
    }

    #[test]
    fn rotation_intensity_examples() {
        let cfg = FeedbackConfig::default();
        assert_eq!(rotation_intensity(5.0, &cfg), 0.0);
        assert_eq!(rotation_intensity(10.0, &cfg), 0.0);
        assert_eq!(rotation_intensity(30.0, &cfg), 1.0);
        assert!((rotation_intensity(-15.0, &cfg) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn continuous_pattern_has_no_gaps() {
        let cfg = FeedbackConfig::default();
        let alert = OverloadAlert {
            timestamp_ms: 500,
            observed_load: 125.0,
            threshold: 120.0,
            source: AlertSource::StanceOverload,
        };
        let cmd = plan_pattern(&alert, &cfg, ActuatorTarget::CrutchActuator1);
        assert_eq!(cmd.intensity, 0.8);
        assert_eq!((cmd.pulse_on_ms, cmd.pulse_off_ms), (1000, 1000));
        let timeline = render_timeline(&cmd);
        assert_eq!(timeline.len(), 1);
        assert!(timeline[0].on);
    }

    #[test]
    fn pulsed_pattern_on_phases() {
        let cfg = FeedbackConfig {
            mode: FeedbackMode::PulsedPattern,
            ..Default::default()
        };
        let alert = OverloadAlert {
            timestamp_ms: 0,
            observed_load: 125.0,
            threshold: 120.0,
            source: AlertSource::StanceOverload,
        };
        let timeline = render_timeline(&plan_pattern(&alert, &cfg, ActuatorTarget::OrthosisActuator));
        let on = timeline.iter().filter(|s| s.on).count();
        assert_eq!(on, 1000usize.div_ceil(400));
        assert_eq!(timeline.last().unwrap().end_ms, 1000);
    }

    #[test]
    fn rotation_alert_maps_to_full_intensity() {
        let mut e = engine();
        assert!(e.evaluate_rotation(0, 8.0).is_none());
        let alert = e.evaluate_rotation(0, 30.0).unwrap();
        let cmds = e.commands_for(&alert);
        assert_eq!(cmds.len(), 1);
        assert_eq!(cmds[0].intensity, 1.0);
        assert_eq!(cmds[0].target, ActuatorTarget::OrthosisActuator);
    }

    #[test]
    fn config_validation() {
        let cfg = FeedbackConfig {
            overload_factor: 1.0,
            ..Default::default()
        };
        assert!(FeedbackEngine::new(&cfg, 100.0).is_err());
        let cfg = FeedbackConfig {
            pulse_on_ms: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    proptest! {
        #[test]
        fn rotation_intensity_monotone(a in 0.0f64..90.0, b in 0.0f64..90.0) {
            let cfg = FeedbackConfig::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (il, ih) = (rotation_intensity(lo, &cfg), rotation_intensity(hi, &cfg));
            prop_assert!(il <= ih);
            prop_assert!((0.0..=1.0).contains(&ih));
        }

        #[test]
        fn pulsed_timeline_alternates(on in 1u32..500, off in 1u32..500, duration in 1u32..5000) {
            let cmd = VibrationCommand {
                timestamp_ms: 100,
                target: ActuatorTarget::CrutchActuator2,
                mode: FeedbackMode::PulsedPattern,
                intensity: 0.5,
                pulse_on_ms: on,
                pulse_off_ms: off,
                duration_ms: duration,
            };
            let t = render_timeline(&cmd);
            prop_assert!(t[0].on);
            for w in t.windows(2) {
                prop_assert!(w[0].on != w[1].on);
                prop_assert_eq!(w[0].end_ms, w[1].start_ms);
            }
            let on_time: u64 = t.iter().filter(|s| s.on).map(|s| s.end_ms - s.start_ms).sum();
            prop_assert!(on_time <= duration as u64);
        }
    }
}
