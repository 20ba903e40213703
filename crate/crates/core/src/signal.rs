//! Pre-processing and filtering of raw frames.
//!
//! FSR path: ADC count -> divider voltage -> sensor resistance -> force, then a
//! causal moving average and one scalar Kalman filter per channel. IMU path:
//! static bias removal, clamping to the configured sensor ranges, and one scalar
//! Kalman filter per axis.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{CalibrationProfile, Region, RegionMap, SensorFrame, FSR_CHANNELS, STANDARD_GRAVITY};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    #[error("ADC count {raw} exceeds full scale {full_scale}")]
    AdcOutOfRange { raw: u16, full_scale: u16 },
    #[error("divider output {v_out} V is at or above the supply rail (short circuit)")]
    ShortCircuit { v_out: f64 },
    #[error("moving-average window must be at least 1")]
    ZeroWindow,
    #[error("bias estimation needs at least {needed} stationary frames, got {found}")]
    InsufficientSamples { needed: usize, found: usize },
    #[error("gyro axis {axis} standard deviation {std_dev:.4} rad/s exceeds {threshold} rad/s; device is moving")]
    MotionDetected { axis: usize, std_dev: f64, threshold: f64 },
    #[error("invalid filter configuration: {0}")]
    InvalidConfig(String),
}

/// FSR resistance as recovered from the voltage divider.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resistance {
    Ohms(f64),
    /// Zero divider output: the sensor is unloaded.
    OpenCircuit,
}

pub fn adc_to_voltage(raw: u16, cal: &CalibrationProfile) -> Result<f64, SignalError> {
    if raw > cal.adc_full_scale {
        return Err(SignalError::AdcOutOfRange {
            raw,
            full_scale: cal.adc_full_scale,
        });
    }
    Ok(f64::from(raw) / f64::from(cal.adc_full_scale) * cal.supply_voltage)
}

/// Inverts `V_out = R_M·V⁺ / (R_M + R_FSR)` for the sensor resistance.
pub fn resistance_from_voltage(v_out: f64, cal: &CalibrationProfile) -> Result<Resistance, SignalError> {
    if v_out <= 0.0 {
        return Ok(Resistance::OpenCircuit);
    }
    if v_out >= cal.supply_voltage {
        return Err(SignalError::ShortCircuit { v_out });
    }
    Ok(Resistance::Ohms(
        cal.reference_resistor_ohm * (cal.supply_voltage - v_out) / v_out,
    ))
}

/// Forward divider equation: output voltage for a given sensor resistance.
pub fn divider_output(r_fsr: Resistance, cal: &CalibrationProfile) -> f64 {
    match r_fsr {
        Resistance::OpenCircuit => 0.0,
        Resistance::Ohms(r) => cal.reference_resistor_ohm * cal.supply_voltage / (cal.reference_resistor_ohm + r),
    }
}

/// Conductance-proportional FSR curve `F = k / R`, with `k` placing the
/// calibrated maximum force at `r_min_ohm`. Clamped to `[0, fsr_force_max_n]`.
pub fn force_from_resistance(r_fsr: Resistance, cal: &CalibrationProfile, r_min_ohm: f64) -> f64 {
    match r_fsr {
        Resistance::OpenCircuit => 0.0,
        Resistance::Ohms(r) => {
            let k = cal.fsr_force_max_n * r_min_ohm;
            (k / r).clamp(0.0, cal.fsr_force_max_n)
        }
    }
}

/// Inverse of [`force_from_resistance`] inside its unclamped range.
pub fn resistance_for_force(force_n: f64, cal: &CalibrationProfile, r_min_ohm: f64) -> Resistance {
    if force_n <= 0.0 {
        Resistance::OpenCircuit
    } else {
        Resistance::Ohms(cal.fsr_force_max_n * r_min_ohm / force_n)
    }
}

/// Full per-channel conversion. A count at the supply rail reads as the
/// maximum calibrated force.
pub fn raw_to_force(raw: u16, cal: &CalibrationProfile, r_min_ohm: f64) -> Result<f64, SignalError> {
    let v_out = adc_to_voltage(raw, cal)?;
    match resistance_from_voltage(v_out, cal) {
        Ok(r) => Ok(force_from_resistance(r, cal, r_min_ohm)),
        Err(SignalError::ShortCircuit { .. }) => Ok(cal.fsr_force_max_n),
        Err(e) => Err(e),
    }
}

/// Causal moving average with truncated warm-up.
#[derive(Debug, Clone)]
pub struct MovingAverage {
    window: usize,
    buf: VecDeque<f64>,
}

impl MovingAverage {
    pub fn new(window: usize) -> Result<Self, SignalError> {
        if window == 0 {
            return Err(SignalError::ZeroWindow);
        }
        Ok(Self {
            window,
            buf: VecDeque::with_capacity(window),
        })
    }

    pub fn push(&mut self, x: f64) -> f64 {
        if self.buf.len() == self.window {
            self.buf.pop_front();
        }
        self.buf.push_back(x);
        self.buf.iter().sum::<f64>() / self.buf.len() as f64
    }
}

pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>, SignalError> {
    let mut ma = MovingAverage::new(window)?;
    Ok(series.iter().map(|&x| ma.push(x)).collect())
}

/// Process and measurement noise of a scalar constant-value Kalman filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanParams {
    pub q: f64,
    pub r: f64,
}

impl KalmanParams {
    fn validate(&self, what: &str) -> Result<(), SignalError> {
        if self.q > 0.0 && self.r > 0.0 {
            Ok(())
        } else {
            Err(SignalError::InvalidConfig(format!("{what}: Q and R must be > 0")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub estimate: f64,
    pub covariance: f64,
    pub process_noise: f64,
    pub measurement_noise: f64,
}

/// One predict/update cycle with an identity process model. Returns the new
/// state, the filtered value and the gain that was applied.
pub fn kalman_step(state: KalmanState, z: f64) -> (KalmanState, f64, f64) {
    let predicted = state.covariance + state.process_noise;
    let gain = predicted / (predicted + state.measurement_noise);
    let estimate = state.estimate + gain * (z - state.estimate);
    let next = KalmanState {
        estimate,
        covariance: (1.0 - gain) * predicted,
        ..state
    };
    (next, estimate, gain)
}

/// Streaming wrapper around [`kalman_step`] that primes itself with the first
/// measurement.
#[derive(Debug, Clone)]
pub struct ScalarKalman {
    params: KalmanParams,
    initial_covariance: f64,
    state: Option<KalmanState>,
}

impl ScalarKalman {
    pub fn new(params: KalmanParams, initial_covariance: f64) -> Self {
        Self {
            params,
            initial_covariance,
            state: None,
        }
    }

    pub fn state(&self) -> Option<KalmanState> {
        self.state
    }

    pub fn filter(&mut self, z: f64) -> f64 {
        match self.state {
            None => {
                self.state = Some(KalmanState {
                    estimate: z,
                    covariance: self.initial_covariance,
                    process_noise: self.params.q,
                    measurement_noise: self.params.r,
                });
                z
            }
            Some(state) => {
                let (next, value, _) = kalman_step(state, z);
                self.state = Some(next);
                value
            }
        }
    }
}

/// Sensor axis that reads +1 g when the foot rests flat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GravityAxis {
    PosX,
    NegX,
    PosY,
    NegY,
    #[default]
    PosZ,
    NegZ,
}

impl GravityAxis {
    pub fn unit(self) -> [f64; 3] {
        match self {
            GravityAxis::PosX => [1.0, 0.0, 0.0],
            GravityAxis::NegX => [-1.0, 0.0, 0.0],
            GravityAxis::PosY => [0.0, 1.0, 0.0],
            GravityAxis::NegY => [0.0, -1.0, 0.0],
            GravityAxis::PosZ => [0.0, 0.0, 1.0],
            GravityAxis::NegZ => [0.0, 0.0, -1.0],
        }
    }
}

/// Filter bank configuration. Loaded from the `conditioning` section of the
/// engine's JSON config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConditioningConfig {
    pub moving_average_window: usize,
    pub fsr_kalman: KalmanParams,
    /// Per-channel overrides keyed by channel index.
    pub fsr_channel_kalman: BTreeMap<usize, KalmanParams>,
    pub imu_kalman: KalmanParams,
    /// Per-axis overrides keyed 0..=2 accel, 3..=5 gyro.
    pub imu_axis_kalman: BTreeMap<usize, KalmanParams>,
    pub kalman_initial_covariance: f64,
    pub fsr_r_min_ohm: f64,
    pub gravity_axis: GravityAxis,
    pub motion_threshold_rad_s: f64,
}

impl Default for ConditioningConfig {
    fn default() -> Self {
        Self {
            moving_average_window: 5,
            // Tuned for event timing: heavier smoothing delays foot off more
            // than foot strike and inflates stance.
            fsr_kalman: KalmanParams { q: 0.05, r: 0.3 },
            fsr_channel_kalman: BTreeMap::new(),
            // Light smoothing only. A lagging accelerometer tilts the attitude
            // correction at every foot strike and the error accumulates.
            imu_kalman: KalmanParams { q: 0.01, r: 0.01 },
            imu_axis_kalman: BTreeMap::new(),
            kalman_initial_covariance: 1.0,
            fsr_r_min_ohm: 250.0,
            gravity_axis: GravityAxis::PosZ,
            motion_threshold_rad_s: 0.05,
        }
    }
}

impl ConditioningConfig {
    pub fn validate(&self) -> Result<(), SignalError> {
        if self.moving_average_window == 0 {
            return Err(SignalError::ZeroWindow);
        }
        self.fsr_kalman.validate("fsr_kalman")?;
        self.imu_kalman.validate("imu_kalman")?;
        for (&ch, p) in &self.fsr_channel_kalman {
            if ch >= FSR_CHANNELS {
                return Err(SignalError::InvalidConfig(format!(
                    "fsr_channel_kalman: channel {ch} out of range"
                )));
            }
            p.validate("fsr_channel_kalman")?;
        }
        for (&axis, p) in &self.imu_axis_kalman {
            if axis >= 6 {
                return Err(SignalError::InvalidConfig(format!(
                    "imu_axis_kalman: axis {axis} out of range"
                )));
            }
            p.validate("imu_axis_kalman")?;
        }
        if !(self.fsr_r_min_ohm > 0.0) {
            return Err(SignalError::InvalidConfig("fsr_r_min_ohm must be > 0".into()));
        }
        if !(self.kalman_initial_covariance >= 0.0) {
            return Err(SignalError::InvalidConfig(
                "kalman_initial_covariance must be >= 0".into(),
            ));
        }
        Ok(())
    }

    fn fsr_params(&self, channel: usize) -> KalmanParams {
        self.fsr_channel_kalman
            .get(&channel)
            .copied()
            .unwrap_or(self.fsr_kalman)
    }

    fn imu_params(&self, axis: usize) -> KalmanParams {
        self.imu_axis_kalman.get(&axis).copied().unwrap_or(self.imu_kalman)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImuBias {
    pub accel: [f64; 3],
    pub gyro: [f64; 3],
}

/// Static offsets from a stationary initialization window: gyro bias is the
/// per-axis mean, accel bias the per-axis mean minus gravity on `gravity_axis`.
pub fn estimate_imu_bias(
    stationary: &[SensorFrame],
    gravity_axis: GravityAxis,
    motion_threshold_rad_s: f64,
) -> Result<ImuBias, SignalError> {
    const MIN_FRAMES: usize = 100;
    if stationary.len() < MIN_FRAMES {
        return Err(SignalError::InsufficientSamples {
            needed: MIN_FRAMES,
            found: stationary.len(),
        });
    }
    let n = stationary.len() as f64;
    let mut bias = ImuBias::default();
    for axis in 0..3 {
        let gyro_mean = stationary.iter().map(|f| f.gyro[axis]).sum::<f64>() / n;
        let var = stationary
            .iter()
            .map(|f| (f.gyro[axis] - gyro_mean).powi(2))
            .sum::<f64>()
            / n;
        let std_dev = var.sqrt();
        if std_dev > motion_threshold_rad_s {
            return Err(SignalError::MotionDetected {
                axis,
                std_dev,
                threshold: motion_threshold_rad_s,
            });
        }
        bias.gyro[axis] = gyro_mean;
        let accel_mean = stationary.iter().map(|f| f.accel[axis]).sum::<f64>() / n;
        bias.accel[axis] = accel_mean - STANDARD_GRAVITY * gravity_axis.unit()[axis];
    }
    Ok(bias)
}

/// Calibrated plantar forces for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceFrame {
    pub timestamp_ms: u64,
    pub force: [f64; FSR_CHANNELS],
    /// Indexed by [`Region::index`].
    pub region_force: [f64; 4],
    pub total_force: f64,
}

impl ForceFrame {
    pub fn from_forces(timestamp_ms: u64, force: [f64; FSR_CHANNELS], map: &RegionMap) -> Self {
        Self {
            timestamp_ms,
            force,
            region_force: map.region_sums(&force),
            total_force: force.iter().sum(),
        }
    }

    pub fn region(&self, region: Region) -> f64 {
        self.region_force[region.index()]
    }

    pub fn forefoot(&self) -> f64 {
        self.region(Region::Metatarsal) + self.region(Region::Toes)
    }

    pub fn scaled(&self, factor: f64, map: &RegionMap) -> Self {
        Self::from_forces(self.timestamp_ms, self.force.map(|f| f * factor), map)
    }
}

/// Bias-corrected, range-limited and filtered inertial sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuFrame {
    pub timestamp_ms: u64,
    pub accel: [f64; 3],
    pub gyro: [f64; 3],
}

/// Per-stream filter context. Drive it from one caller at a time.
#[derive(Debug, Clone)]
pub struct Conditioner {
    cal: CalibrationProfile,
    r_min_ohm: f64,
    map: RegionMap,
    fsr_smoothing: Vec<MovingAverage>,
    fsr_kalman: Vec<ScalarKalman>,
    imu_kalman: Vec<ScalarKalman>,
}

impl Conditioner {
    pub fn new(cal: &CalibrationProfile, cfg: &ConditioningConfig, map: &RegionMap) -> Result<Self, SignalError> {
        cfg.validate()?;
        let p0 = cfg.kalman_initial_covariance;
        Ok(Self {
            cal: cal.clone(),
            r_min_ohm: cfg.fsr_r_min_ohm,
            map: map.clone(),
            fsr_smoothing: (0..FSR_CHANNELS)
                .map(|_| MovingAverage::new(cfg.moving_average_window))
                .collect::<Result<_, _>>()?,
            fsr_kalman: (0..FSR_CHANNELS)
                .map(|ch| ScalarKalman::new(cfg.fsr_params(ch), p0))
                .collect(),
            imu_kalman: (0..6).map(|axis| ScalarKalman::new(cfg.imu_params(axis), p0)).collect(),
        })
    }

    pub fn region_map(&self) -> &RegionMap {
        &self.map
    }

    pub fn condition_frame(&mut self, frame: &SensorFrame) -> Result<(ForceFrame, ImuFrame), SignalError> {
        let mut force = [0.0; FSR_CHANNELS];
        for (ch, slot) in force.iter_mut().enumerate() {
            let f = raw_to_force(frame.fsr_raw[ch], &self.cal, self.r_min_ohm)?;
            let smoothed = self.fsr_smoothing[ch].push(f);
            *slot = self.fsr_kalman[ch].filter(smoothed).max(0.0);
        }

        let accel_limit = self.cal.accel_limit();
        let gyro_limit = self.cal.gyro_limit();
        let mut accel = [0.0; 3];
        let mut gyro = [0.0; 3];
        for axis in 0..3 {
            let a = (frame.accel[axis] - self.cal.accel_bias[axis]).clamp(-accel_limit, accel_limit);
            accel[axis] = self.imu_kalman[axis].filter(a);
            let g = (frame.gyro[axis] - self.cal.gyro_bias[axis]).clamp(-gyro_limit, gyro_limit);
            gyro[axis] = self.imu_kalman[3 + axis].filter(g);
        }

        Ok((
            ForceFrame::from_forces(frame.timestamp_ms, force, &self.map),
            ImuFrame {
                timestamp_ms: frame.timestamp_ms,
                accel,
                gyro,
            },
        ))
    }
}
