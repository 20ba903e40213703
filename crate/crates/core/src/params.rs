//! Spatiotemporal gait parameters, stability index and trial report.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{GaitEvent, GaitEventKind};
use crate::fusion::TrajectoryPoint;
use crate::signal::ForceFrame;
use crate::types::Region;

/// The insole is worn on one foot only, so a cycle spans two steps.
pub const STEPS_PER_CYCLE: f64 = 2.0;

/// Active area of one FSR (5.6 mm sensing diameter), cm².
pub const FSR_ACTIVE_AREA_CM2: f64 = 0.2463;

pub const DEFAULT_CONTACT_AREA_CM2: f64 = 15.0 * FSR_ACTIVE_AREA_CM2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("no complete gait cycle")]
    NoCompleteCycle,
    #[error("trajectory has no sample at {0} ms")]
    TrajectoryGap(u64),
    #[error("no loaded frames in window")]
    NoLoadedFrames,
    #[error("contact area must be positive")]
    ZeroArea,
    #[error("invalid parameter configuration: {0}")]
    InvalidConfig(String),
}

/// Event timestamps of one foot-strike-to-foot-strike span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleEvents {
    pub foot_strike_ms: u64,
    pub foot_flat_ms: u64,
    pub heel_off_ms: u64,
    pub foot_off_ms: u64,
    pub next_foot_strike_ms: u64,
}

pub fn segment_cycles(events: &[GaitEvent]) -> Result<Vec<CycleEvents>, ParamsError> {
    use GaitEventKind::*;
    let cycles: Vec<CycleEvents> = events
        .windows(5)
        .filter_map(|w| {
            let kinds = [w[0].kind, w[1].kind, w[2].kind, w[3].kind, w[4].kind];
            (kinds == [FootStrike, FootFlat, HeelOff, FootOff, FootStrike]).then(|| CycleEvents {
                foot_strike_ms: w[0].timestamp_ms,
                foot_flat_ms: w[1].timestamp_ms,
                heel_off_ms: w[2].timestamp_ms,
                foot_off_ms: w[3].timestamp_ms,
                next_foot_strike_ms: w[4].timestamp_ms,
            })
        })
        .collect();
    if cycles.is_empty() {
        Err(ParamsError::NoCompleteCycle)
    } else {
        Ok(cycles)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalParams {
    pub stance_s: f64,
    pub swing_s: f64,
    pub cycle_s: f64,
}

pub fn temporal_params(cycle: &CycleEvents) -> TemporalParams {
    let stance_s = (cycle.foot_off_ms - cycle.foot_strike_ms) as f64 / 1000.0;
    let swing_s = (cycle.next_foot_strike_ms - cycle.foot_off_ms) as f64 / 1000.0;
    TemporalParams {
        stance_s,
        swing_s,
        // summed rather than differenced so the parts add up exactly
        cycle_s: stance_s + swing_s,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialParams {
    pub step_length_m: f64,
    pub cycle_length_m: f64,
    pub speed_mps: f64,
}

fn position_at(trajectory: &[TrajectoryPoint], ts: u64) -> Result<[f64; 3], ParamsError> {
    trajectory
        .binary_search_by_key(&ts, |p| p.timestamp_ms)
        .map(|i| trajectory[i].position)
        .map_err(|_| ParamsError::TrajectoryGap(ts))
}

/// Horizontal foot displacement between consecutive foot strikes.
/// `trajectory` must be sorted by timestamp.
pub fn spatial_params(cycle: &CycleEvents, trajectory: &[TrajectoryPoint]) -> Result<SpatialParams, ParamsError> {
    let a = position_at(trajectory, cycle.foot_strike_ms)?;
    let b = position_at(trajectory, cycle.next_foot_strike_ms)?;
    let cycle_length_m = (b[0] - a[0]).hypot(b[1] - a[1]);
    let cycle_s = temporal_params(cycle).cycle_s;
    Ok(SpatialParams {
        step_length_m: cycle_length_m / STEPS_PER_CYCLE,
        cycle_length_m,
        speed_mps: if cycle_s > 0.0 { cycle_length_m / cycle_s } else { 0.0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cadence {
    pub cycles_per_min: f64,
    pub steps_per_min: f64,
}

impl Cadence {
    fn from_cycles_per_min(cycles_per_min: f64) -> Self {
        Self {
            cycles_per_min,
            steps_per_min: STEPS_PER_CYCLE * cycles_per_min,
        }
    }
}

/// Foot strikes in `events` scaled to a per-minute rate over `window_s`.
pub fn cadence(events: &[GaitEvent], window_s: f64) -> Result<Cadence, ParamsError> {
    if !(window_s > 0.0) {
        return Err(ParamsError::InvalidConfig("cadence window must be > 0".into()));
    }
    let strikes = events.iter().filter(|e| e.kind == GaitEventKind::FootStrike).count();
    Ok(Cadence::from_cycles_per_min(strikes as f64 * 60.0 / window_s))
}

/// Cadence over the span from the first to the last foot strike. Counting
/// strike-to-strike intervals avoids the edge effect of a fixed window.
pub fn cadence_between_strikes(events: &[GaitEvent]) -> Cadence {
    let strikes: Vec<u64> = events
        .iter()
        .filter(|e| e.kind == GaitEventKind::FootStrike)
        .map(|e| e.timestamp_ms)
        .collect();
    match (strikes.first(), strikes.last()) {
        (Some(&first), Some(&last)) if last > first => {
            let span_min = (last - first) as f64 / 60_000.0;
            Cadence::from_cycles_per_min((strikes.len() - 1) as f64 / span_min)
        }
        _ => Cadence::from_cycles_per_min(0.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilityConfig {
    pub weight_variability: f64,
    pub weight_ap_ratio: f64,
    /// Evaluation window; `None` evaluates each detected gait cycle.
    pub window_ms: Option<u64>,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            weight_variability: 0.5,
            weight_ap_ratio: 0.5,
            window_ms: None,
        }
    }
}

impl StabilityConfig {
    pub fn validate(&self) -> Result<(), ParamsError> {
        let (w1, w2) = (self.weight_variability, self.weight_ap_ratio);
        if !(w1 >= 0.0 && w2 >= 0.0 && ((w1 + w2) - 1.0).abs() < 1e-9) {
            return Err(ParamsError::InvalidConfig(
                "stability weights must be >= 0 and sum to 1".into(),
            ));
        }
        if self.window_ms == Some(0) {
            return Err(ParamsError::InvalidConfig("stability window must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityResult {
    pub index: f64,
    pub pressure_variability_norm: f64,
    pub ap_balance_norm: f64,
}

/// Combines the coefficient of variation of total force with the
/// forefoot/rearfoot balance. Only frames with positive total force count.
pub fn stability_index(frames: &[ForceFrame], cfg: &StabilityConfig) -> Result<StabilityResult, ParamsError> {
    cfg.validate()?;
    let loaded: Vec<&ForceFrame> = frames.iter().filter(|f| f.total_force > 0.0).collect();
    if loaded.is_empty() {
        return Err(ParamsError::NoLoadedFrames);
    }
    let n = loaded.len() as f64;
    let mean = loaded.iter().map(|f| f.total_force).sum::<f64>() / n;
    let var = loaded.iter().map(|f| (f.total_force - mean).powi(2)).sum::<f64>() / n;
    let variability = (var.sqrt() / mean).clamp(0.0, 1.0);

    let balance = loaded
        .iter()
        .map(|f| {
            let fore = f.forefoot();
            let rear = f.region(Region::Heel);
            if fore + rear > 0.0 {
                1.0 - (fore - rear).abs() / (fore + rear)
            } else {
                1.0
            }
        })
        .sum::<f64>()
        / n;
    let balance = balance.clamp(0.0, 1.0);

    let index = cfg.weight_variability * (1.0 - variability) + cfg.weight_ap_ratio * balance;
    Ok(StabilityResult {
        index: index.clamp(0.0, 1.0),
        pressure_variability_norm: variability,
        ap_balance_norm: balance,
    })
}

/// Mean of `total_force / area` over frames loaded above `min_load_n`.
/// Returns 0 when no frame qualifies.
pub fn mean_plantar_pressure(frames: &[ForceFrame], area_cm2: f64, min_load_n: f64) -> Result<f64, ParamsError> {
    if !(area_cm2 > 0.0) {
        return Err(ParamsError::ZeroArea);
    }
    let (sum, count) = frames
        .iter()
        .filter(|f| f.total_force > min_load_n)
        .fold((0.0, 0usize), |(s, c), f| (s + f.total_force, c + 1));
    Ok(if count == 0 { 0.0 } else { sum / count as f64 / area_cm2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitCycleRecord {
    pub cycle_index: usize,
    pub foot_strike_ms: u64,
    pub foot_flat_ms: u64,
    pub heel_off_ms: u64,
    pub foot_off_ms: u64,
    pub next_foot_strike_ms: u64,
    pub stance_s: f64,
    pub swing_s: f64,
    pub cycle_s: f64,
    pub stance_fraction: f64,
    pub step_length_m: f64,
    pub cycle_length_m: f64,
    pub speed_mps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub sd: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: 0.0, sd: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub cycles: usize,
    pub stance_duration_s: Stat,
    pub swing_duration_s: Stat,
    pub cycle_duration_s: Stat,
    pub stance_fraction: Stat,
    pub step_length_m: Stat,
    pub cycle_length_m: Stat,
    pub gait_speed_mps: Stat,
    pub cadence: Cadence,
    pub mean_plantar_pressure_n_cm2: f64,
    pub stability: StabilityResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub engine_version: String,
    pub euler_convention: String,
    pub stability_weights: [f64; 2],
    pub stability_definition: String,
    pub cadence_definition: String,
    pub step_length_definition: String,
    pub contact_area_cm2: f64,
    /// Free-form engine configuration echo, filled by the pipeline.
    #[serde(default)]
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitReport {
    /// Content fingerprint of the analyzed frames.
    pub trial_id: String,
    pub metadata: ReportMetadata,
    pub cycles: Vec<GaitCycleRecord>,
    pub summary: TrialSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReportConfig {
    pub stability: StabilityConfig,
    pub contact_area_cm2: f64,
    /// Frames at or below this total force (N) are excluded from pressure
    /// averages. `None` includes every frame with any load.
    pub pressure_min_load_n: Option<f64>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            stability: StabilityConfig::default(),
            contact_area_cm2: DEFAULT_CONTACT_AREA_CM2,
            pressure_min_load_n: None,
        }
    }
}

fn windowed_stability(
    frames: &[ForceFrame],
    cycles: &[CycleEvents],
    cfg: &StabilityConfig,
) -> Result<StabilityResult, ParamsError> {
    let windows: Vec<(u64, u64)> = match cfg.window_ms {
        None => cycles
            .iter()
            .map(|c| (c.foot_strike_ms, c.next_foot_strike_ms))
            .collect(),
        Some(w) => {
            let (Some(first), Some(last)) = (frames.first(), frames.last()) else {
                return Err(ParamsError::NoLoadedFrames);
            };
            (first.timestamp_ms..=last.timestamp_ms)
                .step_by(w as usize)
                .map(|start| (start, start + w))
                .collect()
        }
    };
    let results: Vec<StabilityResult> = windows
        .iter()
        .filter_map(|&(start, end)| {
            let lo = frames.partition_point(|f| f.timestamp_ms < start);
            let hi = frames.partition_point(|f| f.timestamp_ms < end);
            stability_index(&frames[lo..hi], cfg).ok()
        })
        .collect();
    if results.is_empty() {
        return stability_index(frames, cfg);
    }
    let n = results.len() as f64;
    let avg = |g: fn(&StabilityResult) -> f64| results.iter().map(g).sum::<f64>() / n;
    Ok(StabilityResult {
        index: avg(|r| r.index),
        pressure_variability_norm: avg(|r| r.pressure_variability_norm),
        ap_balance_norm: avg(|r| r.ap_balance_norm),
    })
}

/// Composes segmentation, temporal and spatial parameters, cadence,
/// pressure and stability into one report. `frames` and `trajectory` must be
/// time-ordered.
pub fn build_report(
    frames: &[ForceFrame],
    events: &[GaitEvent],
    trajectory: &[TrajectoryPoint],
    cfg: &ReportConfig,
) -> Result<GaitReport, ParamsError> {
    cfg.stability.validate()?;
    let segments = segment_cycles(events)?;
    let mut cycles = Vec::with_capacity(segments.len());
    for (cycle_index, c) in segments.iter().enumerate() {
        let t = temporal_params(c);
        let s = spatial_params(c, trajectory)?;
        cycles.push(GaitCycleRecord {
            cycle_index,
            foot_strike_ms: c.foot_strike_ms,
            foot_flat_ms: c.foot_flat_ms,
            heel_off_ms: c.heel_off_ms,
            foot_off_ms: c.foot_off_ms,
            next_foot_strike_ms: c.next_foot_strike_ms,
            stance_s: t.stance_s,
            swing_s: t.swing_s,
            cycle_s: t.cycle_s,
            stance_fraction: t.stance_s / t.cycle_s,
            step_length_m: s.step_length_m,
            cycle_length_m: s.cycle_length_m,
            speed_mps: s.speed_mps,
        });
    }

    let col = |g: fn(&GaitCycleRecord) -> f64| Stat::of(&cycles.iter().map(g).collect::<Vec<_>>());
    let stability = windowed_stability(frames, &segments, &cfg.stability)?;
    let summary = TrialSummary {
        cycles: cycles.len(),
        stance_duration_s: col(|c| c.stance_s),
        swing_duration_s: col(|c| c.swing_s),
        cycle_duration_s: col(|c| c.cycle_s),
        stance_fraction: col(|c| c.stance_fraction),
        step_length_m: col(|c| c.step_length_m),
        cycle_length_m: col(|c| c.cycle_length_m),
        gait_speed_mps: col(|c| c.speed_mps),
        cadence: cadence_between_strikes(events),
        mean_plantar_pressure_n_cm2: mean_plantar_pressure(
            frames,
            cfg.contact_area_cm2,
            cfg.pressure_min_load_n.unwrap_or(0.0),
        )?,
        stability,
    };

    Ok(GaitReport {
        trial_id: String::new(),
        metadata: ReportMetadata {
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
            euler_convention: "ZYX (yaw-pitch-roll), radians".into(),
            stability_weights: [cfg.stability.weight_variability, cfg.stability.weight_ap_ratio],
            stability_definition: "w1*(1 - clamp(CV of loaded total force, 0, 1)) + w2*mean(1 - |fore - rear|/(fore + rear)); fore = metatarsals + toes, rear = heel; averaged over gait cycles".into(),
            cadence_definition: "foot strikes between first and last strike per minute; steps/min = 2 x cycles/min (unilateral insole)".into(),
            step_length_definition: "cycle length / 2 (unilateral insole)".into(),
            contact_area_cm2: cfg.contact_area_cm2,
            config: serde_json::Value::Null,
        },
        cycles,
        summary,
    })
}

/// Display name and unit of each reported parameter, in table order.
pub const REPORT_PARAMETERS: [(&str, &str, &str); 6] = [
    ("Temporal", "Stance Duration", "s"),
    ("Temporal", "Swing Duration", "s"),
    ("Temporal", "Cycle Duration", "s"),
    ("Spatial", "Step Length", "m"),
    ("Spatial", "Cycle Length", "m"),
    ("Kinetic", "Mean Plantar Pressure", "N/cm^2"),
];

/// Flat CSV form: one row per parameter with mean and SD.
pub fn write_report_csv<W: Write>(writer: W, report: &GaitReport) -> std::io::Result<()> {
    let s = &report.summary;
    let values = [
        s.stance_duration_s,
        s.swing_duration_s,
        s.cycle_duration_s,
        s.step_length_m,
        s.cycle_length_m,
        Stat {
            mean: s.mean_plantar_pressure_n_cm2,
            sd: 0.0,
        },
    ];
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["parameter_type", "parameter", "unit", "mean", "sd"])?;
    for ((kind, name, unit), stat) in REPORT_PARAMETERS.iter().zip(values) {
        out.write_record([*kind, *name, *unit, &stat.mean.to_string(), &stat.sd.to_string()])?;
    }
    let extra = [
        ("Temporal", "Cadence", "steps/min", s.cadence.steps_per_min),
        ("Spatial", "Gait Speed", "m/s", s.gait_speed_mps.mean),
        ("Stability", "Stability Index", "1", s.stability.index),
    ];
    for (kind, name, unit, value) in extra {
        out.write_record([kind, name, unit, &value.to_string(), ""])?;
    }
    out.flush()
}
