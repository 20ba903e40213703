//! Rule-based gait event detection over filtered plantar forces.
//!
//! A four-phase state machine (swing, early/mid/late stance) emits foot strike,
//! foot flat, heel off and foot off events. All thresholds are fractions of
//! body weight, so the detector is independent of the absolute force scale.
//! During swing every channel's baseline tracks its residual reading, which
//! removes the offsets FSRs keep after unloading.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::ForceFrame;
use crate::types::{Region, RegionMap, FSR_CHANNELS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GaitEventKind {
    FootStrike,
    FootFlat,
    HeelOff,
    FootOff,
}

impl GaitEventKind {
    pub const ALL: [GaitEventKind; 4] = [Self::FootStrike, Self::FootFlat, Self::HeelOff, Self::FootOff];

    pub fn next(self) -> Self {
        match self {
            Self::FootStrike => Self::FootFlat,
            Self::FootFlat => Self::HeelOff,
            Self::HeelOff => Self::FootOff,
            Self::FootOff => Self::FootStrike,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Self::FootStrike => 1,
            Self::FootFlat => 2,
            Self::HeelOff => 3,
            Self::FootOff => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }
}

impl fmt::Display for GaitEventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::FootStrike => "FootStrike",
            Self::FootFlat => "FootFlat",
            Self::HeelOff => "HeelOff",
            Self::FootOff => "FootOff",
        };
        f.write_str(s)
    }
}

impl FromStr for GaitEventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let normalized: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match normalized.as_str() {
            "footstrike" => Ok(Self::FootStrike),
            "footflat" => Ok(Self::FootFlat),
            "heeloff" => Ok(Self::HeelOff),
            "footoff" => Ok(Self::FootOff),
            _ => Err(format!("unknown gait event `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaitEvent {
    pub kind: GaitEventKind,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Swing,
    EarlyStance,
    MidStance,
    LateStance,
}

impl Phase {
    pub fn is_stance(self) -> bool {
        !matches!(self, Phase::Swing)
    }

    /// Foot strike through heel off: the window in which the foot is flat and
    /// stationary.
    pub fn is_foot_stationary(self) -> bool {
        matches!(self, Phase::EarlyStance | Phase::MidStance)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EventError {
    #[error("trial contains no frames")]
    EmptyTrial,
    #[error("invalid threshold configuration: {0}")]
    InvalidConfig(String),
    #[error("event log: {0}")]
    Csv(String),
}

/// Detection thresholds, as fractions of body weight unless noted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdConfig {
    pub strike_threshold: f64,
    pub flat_threshold: f64,
    /// Fraction of the heel's within-stance peak below which the heel is off.
    pub heel_off_heel_fraction: f64,
    pub off_threshold: f64,
    /// A region counts as loaded above this fraction of body weight.
    pub region_load_threshold: f64,
    pub min_phase_ms: u64,
    pub baseline_correction: bool,
    /// Per-frame exponential tracking rate of the swing-phase baseline.
    pub baseline_rate: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            strike_threshold: 0.10,
            flat_threshold: 0.40,
            heel_off_heel_fraction: 0.20,
            off_threshold: 0.05,
            region_load_threshold: 0.05,
            min_phase_ms: 50,
            baseline_correction: true,
            baseline_rate: 0.08,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<(), EventError> {
        let ordered = 0.0 < self.off_threshold
            && self.off_threshold < self.strike_threshold
            && self.strike_threshold < self.flat_threshold
            && self.flat_threshold <= 1.0;
        if !ordered {
            return Err(EventError::InvalidConfig(
                "thresholds must satisfy 0 < off < strike < flat <= 1".into(),
            ));
        }
        if !(self.heel_off_heel_fraction > 0.0 && self.heel_off_heel_fraction < 1.0) {
            return Err(EventError::InvalidConfig(
                "heel_off_heel_fraction must be in (0, 1)".into(),
            ));
        }
        if !(self.region_load_threshold >= 0.0) {
            return Err(EventError::InvalidConfig("region_load_threshold must be >= 0".into()));
        }
        if !(self.baseline_rate > 0.0 && self.baseline_rate <= 1.0) {
            return Err(EventError::InvalidConfig("baseline_rate must be in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsmState {
    pub phase: Phase,
    /// `None` until the first frame has been seen.
    pub phase_entry_ms: Option<u64>,
    pub baselines: [f64; FSR_CHANNELS],
    /// Highest heel-region force since the last foot strike.
    pub heel_peak: f64,
}

impl Default for FsmState {
    fn default() -> Self {
        Self {
            phase: Phase::Swing,
            phase_entry_ms: None,
            baselines: [0.0; FSR_CHANNELS],
            heel_peak: 0.0,
        }
    }
}

/// Applies (and during swing, updates) the per-channel baselines.
pub fn baseline_correct(
    state: &mut FsmState,
    channel_forces: &[f64; FSR_CHANNELS],
    in_swing: bool,
    rate: f64,
) -> [f64; FSR_CHANNELS] {
    let mut corrected = [0.0; FSR_CHANNELS];
    for ((baseline, &raw), out) in state.baselines.iter_mut().zip(channel_forces).zip(corrected.iter_mut()) {
        if in_swing {
            *baseline = (*baseline + rate * (raw - *baseline)).max(0.0);
        }
        *out = (raw - *baseline).max(0.0);
    }
    corrected
}

/// Advances the state machine by one (already baseline-corrected) frame.
pub fn fsm_step(
    state: &mut FsmState,
    frame: &ForceFrame,
    cfg: &ThresholdConfig,
    body_weight: f64,
) -> Option<GaitEvent> {
    let now = frame.timestamp_ms;
    let entry = *state.phase_entry_ms.get_or_insert(now);
    if state.phase.is_stance() {
        state.heel_peak = state.heel_peak.max(frame.region(Region::Heel));
    }
    if now.saturating_sub(entry) < cfg.min_phase_ms {
        return None;
    }

    let total = frame.total_force;
    let loaded = cfg.region_load_threshold * body_weight;
    let transition = match state.phase {
        Phase::Swing if total > cfg.strike_threshold * body_weight => {
            state.heel_peak = frame.region(Region::Heel);
            Some((Phase::EarlyStance, GaitEventKind::FootStrike))
        }
        Phase::EarlyStance
            if total >= cfg.flat_threshold * body_weight
                && frame.region(Region::Heel) > loaded
                && frame.forefoot() > loaded =>
        {
            Some((Phase::MidStance, GaitEventKind::FootFlat))
        }
        Phase::MidStance if frame.region(Region::Heel) < cfg.heel_off_heel_fraction * state.heel_peak => {
            Some((Phase::LateStance, GaitEventKind::HeelOff))
        }
        Phase::LateStance if total < cfg.off_threshold * body_weight => Some((Phase::Swing, GaitEventKind::FootOff)),
        _ => None,
    };

    transition.map(|(phase, kind)| {
        state.phase = phase;
        state.phase_entry_ms = Some(now);
        GaitEvent {
            kind,
            timestamp_ms: now,
        }
    })
}

/// Per-frame output of [`EventDetector::process`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorOutput {
    pub corrected: ForceFrame,
    /// Phase after this frame has been processed.
    pub phase: Phase,
    pub event: Option<GaitEvent>,
}

/// Streaming detector context: baseline correction followed by the FSM.
#[derive(Debug, Clone)]
pub struct EventDetector {
    state: FsmState,
    cfg: ThresholdConfig,
    body_weight: f64,
    map: RegionMap,
}

impl EventDetector {
    pub fn new(cfg: &ThresholdConfig, body_weight: f64, map: &RegionMap) -> Result<Self, EventError> {
        cfg.validate()?;
        if !(body_weight > 0.0) {
            return Err(EventError::InvalidConfig("body weight must be > 0".into()));
        }
        Ok(Self {
            state: FsmState::default(),
            cfg: cfg.clone(),
            body_weight,
            map: map.clone(),
        })
    }

    pub fn phase(&self) -> Phase {
        self.state.phase
    }

    pub fn state(&self) -> &FsmState {
        &self.state
    }

    pub fn process(&mut self, frame: &ForceFrame) -> DetectorOutput {
        let corrected = if self.cfg.baseline_correction {
            let in_swing = self.state.phase == Phase::Swing;
            let forces = baseline_correct(&mut self.state, &frame.force, in_swing, self.cfg.baseline_rate);
            ForceFrame::from_forces(frame.timestamp_ms, forces, &self.map)
        } else {
            *frame
        };
        let event = fsm_step(&mut self.state, &corrected, &self.cfg, self.body_weight);
        DetectorOutput {
            corrected,
            phase: self.state.phase,
            event,
        }
    }
}

/// Batch detection over a time-ordered trial.
pub fn detect_events(
    trial: &[ForceFrame],
    cfg: &ThresholdConfig,
    body_weight: f64,
    map: &RegionMap,
) -> Result<Vec<GaitEvent>, EventError> {
    if trial.is_empty() {
        return Err(EventError::EmptyTrial);
    }
    let mut detector = EventDetector::new(cfg, body_weight, map)?;
    Ok(trial.iter().filter_map(|f| detector.process(f).event).collect())
}

/// Event log export: `timestamp_ms,event_kind`.
pub fn write_events_csv<W: Write>(writer: W, events: &[GaitEvent]) -> Result<(), EventError> {
    let mut out = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| EventError::Csv(e.to_string());
    out.write_record(["timestamp_ms", "event_kind"]).map_err(err)?;
    for e in events {
        out.write_record([e.timestamp_ms.to_string(), e.kind.to_string()])
            .map_err(err)?;
    }
    out.flush().map_err(|e| EventError::Csv(e.to_string()))
}

pub fn read_events_csv<R: Read>(reader: R) -> Result<Vec<GaitEvent>, EventError> {
    let mut input = csv::Reader::from_reader(reader);
    let mut events = Vec::new();
    for record in input.records() {
        let record = record.map_err(|e| EventError::Csv(e.to_string()))?;
        let timestamp_ms = record
            .get(0)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| EventError::Csv(format!("bad timestamp in {record:?}")))?;
        let kind = record
            .get(1)
            .ok_or_else(|| EventError::Csv(format!("missing event kind in {record:?}")))?
            .parse()
            .map_err(EventError::Csv)?;
        events.push(GaitEvent { kind, timestamp_ms });
    }
    Ok(events)
}
