//! Synthetic gait trials with exact ground truth.
//!
//! Each cycle starts with a foot strike. The total plantar force rises with a
//! raised-cosine ramp to body weight, holds, and falls back to zero at foot
//! off. Load migrates from heel to midfoot and forefoot, then from
//! metatarsals to toes. During swing the foot follows a minimum-jerk forward
//! translation with a vertical lift and a pitch excursion. The inertial
//! channels are the analytic derivatives of that trajectory, expressed in the
//! sensor frame.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::DEFAULT_CONTACT_AREA_CM2;
use crate::signal::{raw_to_force, ImuBias};
use crate::telemetry::packet::quantize_imu;
use crate::telemetry::trial_fingerprint;
use crate::types::{CalibrationProfile, Region, RegionMap, SensorFrame, FSR_CHANNELS, STANDARD_GRAVITY};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation profile: {0}")]
    InvalidProfile(String),
    #[error("cycle {index} out of range (trial has {cycles})")]
    CycleOutOfRange { index: usize, cycles: usize },
    #[error("overload factor must be > 1, got {0}")]
    InvalidFactor(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseProfile {
    pub force_sd_n: f64,
    pub accel_sd: f64,
    pub gyro_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StuckChannel {
    pub channel: usize,
    pub offset_n: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverloadCycle {
    pub cycle: usize,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimProfile {
    pub cadence_cycles_per_min: f64,
    pub stance_fraction: f64,
    pub cycle_length_m: f64,
    pub body_weight_n: f64,
    /// Walking time; the stream adds a still lead-in and a loaded tail.
    pub trial_duration_s: f64,
    pub sample_rate_hz: f64,
    pub lead_in_ms: f64,
    pub tail_ms: f64,
    pub load_rise_ms: f64,
    pub load_fall_ms: f64,
    /// Peak-to-zero amplitude of a sinusoidal ripple on the stance plateau (N).
    pub ripple_n: f64,
    pub swing_height_m: f64,
    pub swing_pitch_deg: f64,
    pub noise: NoiseProfile,
    pub stuck_channel: Option<StuckChannel>,
    pub overload_cycles: Vec<OverloadCycle>,
    pub imu_bias: ImuBias,
    pub device_id: u8,
}

impl Default for SimProfile {
    /// Slow treadmill walk: 1.5 km/h at one cycle per second.
    fn default() -> Self {
        Self {
            cadence_cycles_per_min: 60.0,
            stance_fraction: 0.60,
            cycle_length_m: 1.5 / 3.6,
            body_weight_n: 8.0,
            trial_duration_s: 10.0,
            sample_rate_hz: 100.0,
            lead_in_ms: 1000.0,
            tail_ms: 500.0,
            load_rise_ms: 80.0,
            load_fall_ms: 120.0,
            ripple_n: 0.0,
            swing_height_m: 0.05,
            swing_pitch_deg: 10.0,
            noise: NoiseProfile::default(),
            stuck_channel: None,
            overload_cycles: Vec::new(),
            imu_bias: ImuBias::default(),
            device_id: 1,
        }
    }
}

impl SimProfile {
    pub fn period_ms(&self) -> f64 {
        60_000.0 / self.cadence_cycles_per_min
    }

    pub fn cycle_count(&self) -> usize {
        (self.trial_duration_s * self.cadence_cycles_per_min / 60.0 + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidProfile(m));
        if !(self.stance_fraction > 0.0 && self.stance_fraction < 1.0) {
            return bad("stance_fraction must be in (0, 1)".into());
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz <= 1000.0) {
            return bad("sample_rate_hz must be in (0, 1000]".into());
        }
        let positive = [
            ("cadence_cycles_per_min", self.cadence_cycles_per_min),
            ("body_weight_n", self.body_weight_n),
            ("trial_duration_s", self.trial_duration_s),
            ("load_rise_ms", self.load_rise_ms),
            ("load_fall_ms", self.load_fall_ms),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be > 0"));
            }
        }
        let non_negative = [
            ("cycle_length_m", self.cycle_length_m),
            ("lead_in_ms", self.lead_in_ms),
            ("tail_ms", self.tail_ms),
            ("ripple_n", self.ripple_n),
            ("swing_height_m", self.swing_height_m),
            ("noise.force_sd_n", self.noise.force_sd_n),
            ("noise.accel_sd", self.noise.accel_sd),
            ("noise.gyro_sd", self.noise.gyro_sd),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be >= 0"));
            }
        }
        if !self.swing_pitch_deg.is_finite() || self.swing_pitch_deg.abs() >= 90.0 {
            return bad("swing_pitch_deg must be within (-90, 90)".into());
        }
        if self.cycle_count() == 0 {
            return bad("trial too short for one gait cycle".into());
        }
        let stance = self.stance_fraction * self.period_ms();
        if self.load_rise_ms + self.load_fall_ms > stance {
            return bad("load ramps longer than the stance phase".into());
        }
        if self.ripple_n >= self.body_weight_n {
            return bad("ripple must be smaller than body weight".into());
        }
        if let Some(s) = self.stuck_channel {
            if s.channel >= FSR_CHANNELS || !(s.offset_n >= 0.0) {
                return bad("stuck channel index or offset out of range".into());
            }
        }
        for o in &self.overload_cycles {
            if o.cycle >= self.cycle_count() || !(o.factor > 0.0) {
                return bad(format!("overload entry for cycle {} is invalid", o.cycle));
            }
        }
        Ok(())
    }

    fn overload_factor(&self, cycle: usize) -> f64 {
        self.overload_cycles
            .iter()
            .filter(|o| o.cycle == cycle)
            .map(|o| o.factor)
            .product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthCycle {
    pub cycle_index: usize,
    pub foot_strike_ms: f64,
    pub foot_flat_ms: f64,
    pub heel_off_ms: f64,
    pub foot_off_ms: f64,
    pub next_foot_strike_ms: f64,
    pub stance_s: f64,
    pub swing_s: f64,
    pub cycle_s: f64,
    pub step_length_m: f64,
    pub cycle_length_m: f64,
    pub speed_mps: f64,
    pub overload_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub trial_id: String,
    pub seed: u64,
    pub profile: SimProfile,
    pub cycles: Vec<TruthCycle>,
    pub cadence_cycles_per_min: f64,
    pub cadence_steps_per_min: f64,
    /// Mean over frames loaded above 5 % of body weight, N/cm².
    pub mean_pressure_n_cm2: f64,
    pub contact_area_cm2: f64,
}

impl GroundTruth {
    pub fn mean<F: Fn(&TruthCycle) -> f64>(&self, f: F) -> f64 {
        self.cycles.iter().map(f).sum::<f64>() / self.cycles.len() as f64
    }
}

/// Anatomical sub-event offsets as fractions of stance: loading response
/// ends at 1/6, heel leaves the ground at 1/2 (10 % and 30 % of the cycle
/// for a 60 % stance).
const FOOT_FLAT_OF_STANCE: f64 = 1.0 / 6.0;
const HEEL_OFF_OF_STANCE: f64 = 0.5;

/// Within-region channel shares (each region sums to 1).
const HEEL_SHARES: [f64; 3] = [0.35, 0.35, 0.30];
const MIDFOOT_SHARES: [f64; 2] = [0.5, 0.5];
const METATARSAL_SHARES: [f64; 5] = [0.15, 0.22, 0.26, 0.22, 0.15];
const TOE_SHARES: [f64; 5] = [0.40, 0.18, 0.16, 0.14, 0.12];
const MIDFOOT_WEIGHT: f64 = 0.15;

/// 0 before `a`, 1 after `b`, raised cosine between.
fn rc_up(t: f64, a: f64, b: f64) -> f64 {
    if t <= a {
        0.0
    } else if t >= b {
        1.0
    } else {
        0.5 * (1.0 - (PI * (t - a) / (b - a)).cos())
    }
}

fn channel_shares(map: &RegionMap) -> [f64; FSR_CHANNELS] {
    let mut shares = [0.0; FSR_CHANNELS];
    for region in Region::ALL {
        let table: &[f64] = match region {
            Region::Heel => &HEEL_SHARES,
            Region::Midfoot => &MIDFOOT_SHARES,
            Region::Metatarsal => &METATARSAL_SHARES,
            Region::Toes => &TOE_SHARES,
        };
        let channels: Vec<usize> = map.channels_in(region).collect();
        for (i, &ch) in channels.iter().enumerate() {
            shares[ch] = table.get(i).copied().unwrap_or(1.0 / channels.len() as f64);
        }
        // Renormalize if the map's region sizes differ from the tables.
        let sum: f64 = channels.iter().map(|&ch| shares[ch]).sum();
        channels.iter().for_each(|&ch| shares[ch] /= sum);
    }
    shares
}

/// Region weights (unnormalized) at `u` ms into a stance of `stance` ms.
fn region_weights(u: f64, stance: f64) -> [f64; 4] {
    let flat = FOOT_FLAT_OF_STANCE * stance;
    let heel_off = HEEL_OFF_OF_STANCE * stance;
    let heel = 1.0 - rc_up(u, flat, heel_off);
    let fore = rc_up(u, 0.0, flat);
    let mid = MIDFOOT_WEIGHT * fore * (1.0 - rc_up(u, flat, heel_off));
    let toe_fraction = 0.2 + 0.4 * rc_up(u, heel_off, stance);
    let mut w = [0.0; 4];
    w[Region::Heel.index()] = heel;
    w[Region::Midfoot.index()] = mid;
    w[Region::Metatarsal.index()] = fore * (1.0 - toe_fraction);
    w[Region::Toes.index()] = fore * toe_fraction;
    w
}

/// Largest ADC count whose calibrated force does not exceed `force`.
pub fn force_to_raw(force: f64, cal: &CalibrationProfile, r_min_ohm: f64) -> u16 {
    let f = |raw: u16| raw_to_force(raw, cal, r_min_ohm).unwrap_or(f64::INFINITY);
    if !(force > 0.0) {
        return 0;
    }
    let (mut lo, mut hi) = (0u16, cal.adc_full_scale);
    if f(hi) <= force {
        return hi;
    }
    // invariant: f(lo) <= force < f(hi)
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if f(mid) <= force {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Smallest ADC count whose calibrated force reaches `force`.
fn force_to_raw_ceil(force: f64, cal: &CalibrationProfile, r_min_ohm: f64) -> u16 {
    let raw = force_to_raw(force, cal, r_min_ohm);
    if raw_to_force(raw, cal, r_min_ohm).unwrap_or(0.0) >= force || raw == cal.adc_full_scale {
        raw
    } else {
        raw + 1
    }
}

/// Sensor-frame specific force and body rate for the swing trajectory.
struct SwingKinematics {
    length: f64,
    height: f64,
    pitch: f64,
    duration_s: f64,
}

impl SwingKinematics {
    /// `(forward position, accel_world, pitch, pitch rate)` at swing phase `s`.
    fn at(&self, s: f64) -> (f64, Vector3<f64>, f64, f64) {
        let t2 = self.duration_s * self.duration_s;
        let x = self.length * (10.0 * s.powi(3) - 15.0 * s.powi(4) + 6.0 * s.powi(5));
        let ax = self.length / t2 * (60.0 * s - 180.0 * s * s + 120.0 * s.powi(3));
        let (sn, cs) = (PI * s).sin_cos();
        // z = H sin^4(pi s)
        let az = self.height / t2 * 4.0 * PI * PI * sn * sn * (3.0 * cs * cs - sn * sn);
        let theta = self.pitch * sn.powi(4);
        let theta_dot = self.pitch / self.duration_s * 4.0 * PI * sn.powi(3) * cs;
        (x, Vector3::new(ax, 0.0, az), theta, theta_dot)
    }
}

/// Clean trial plus ground truth. Noise, stuck channel and overloads in the
/// profile are applied on top, deterministically from `seed`.
pub fn synthesize_trial(profile: &SimProfile, seed: u64) -> Result<(Vec<SensorFrame>, GroundTruth), SimError> {
    profile.validate()?;
    let cal = CalibrationProfile {
        body_weight_n: profile.body_weight_n,
        ..CalibrationProfile::default()
    };
    let r_min = crate::signal::ConditioningConfig::default().fsr_r_min_ohm;
    let map = RegionMap::default();
    let shares = channel_shares(&map);

    let period = profile.period_ms();
    let stance = profile.stance_fraction * period;
    let swing = period - stance;
    let n_cycles = profile.cycle_count();
    let lead = profile.lead_in_ms;
    let end_ms = lead + n_cycles as f64 * period + profile.tail_ms;
    let dt_ms = 1000.0 / profile.sample_rate_hz;
    let n_frames = (end_ms / dt_ms).floor() as usize + 1;
    let kin = SwingKinematics {
        length: profile.cycle_length_m,
        height: profile.swing_height_m,
        pitch: profile.swing_pitch_deg.to_radians(),
        duration_s: swing / 1000.0,
    };
    let bw = profile.body_weight_n;
    let g = Vector3::new(0.0, 0.0, STANDARD_GRAVITY);

    let mut true_totals = Vec::with_capacity(n_frames);
    let mut frames = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let ts = (i as f64 * dt_ms).round() as u64;
        let t = ts as f64;
        let since_lead = t - lead;
        let (cycle, u) = if since_lead < 0.0 {
            (None, 0.0)
        } else {
            let k = ((since_lead / period).floor() as usize).min(n_cycles);
            (Some(k), since_lead - k as f64 * period)
        };

        let mut total = 0.0;
        let mut weights = [0.0; 4];
        let mut accel_world = Vector3::zeros();
        let mut pitch = 0.0;
        let mut pitch_rate = 0.0;
        match cycle {
            Some(k) if k == n_cycles => {
                total = bw * rc_up(u, 0.0, profile.load_rise_ms);
                weights = region_weights(u.min(FOOT_FLAT_OF_STANCE * stance), stance);
            }
            Some(k) if u < stance => {
                let envelope = rc_up(u, 0.0, profile.load_rise_ms) * rc_up(stance - u, 0.0, profile.load_fall_ms);
                let ripple = profile.ripple_n * (2.0 * PI * u / (stance / 3.0)).sin();
                total = profile.overload_factor(k) * (bw + ripple) * envelope;
                weights = region_weights(u, stance);
            }
            Some(_) => {
                let s = ((u - stance) / swing).clamp(0.0, 1.0);
                let (_, a, th, th_dot) = kin.at(s);
                accel_world = a;
                pitch = th;
                pitch_rate = th_dot;
            }
            None => {}
        }
        true_totals.push(total);

        let weight_sum: f64 = weights.iter().sum();
        let mut fsr_raw = [0u16; FSR_CHANNELS];
        for ch in 0..FSR_CHANNELS {
            let region_w = if weight_sum > 0.0 {
                weights[map.regions[ch].index()] / weight_sum
            } else {
                0.0
            };
            fsr_raw[ch] = force_to_raw(total * region_w * shares[ch], &cal, r_min);
        }

        // Specific force in the sensor frame: R(pitch)^T (a + g).
        let (sp, cp) = pitch.sin_cos();
        let v = accel_world + g;
        let specific = [cp * v.x - sp * v.z, v.y, sp * v.x + cp * v.z];
        let frame = SensorFrame {
            timestamp_ms: ts,
            fsr_raw,
            accel: std::array::from_fn(|a| specific[a] + profile.imu_bias.accel[a]),
            gyro: std::array::from_fn(|a| if a == 1 { pitch_rate } else { 0.0 } + profile.imu_bias.gyro[a]),
            device_id: profile.device_id,
        };
        frames.push(frame);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    add_noise(&mut frames, &profile.noise, &cal, r_min, &mut rng);
    if let Some(stuck) = profile.stuck_channel {
        add_stuck_channel(&mut frames, stuck, &cal, r_min);
    }
    for f in &mut frames {
        *f = quantize_imu(f);
    }

    let min_load = 0.05 * bw;
    let (sum, count) = true_totals
        .iter()
        .filter(|&&t| t > min_load)
        .fold((0.0, 0usize), |(s, c), &t| (s + t, c + 1));
    let cycles = (0..n_cycles)
        .map(|k| {
            let fs = lead + k as f64 * period;
            TruthCycle {
                cycle_index: k,
                foot_strike_ms: fs,
                foot_flat_ms: fs + FOOT_FLAT_OF_STANCE * stance,
                heel_off_ms: fs + HEEL_OFF_OF_STANCE * stance,
                foot_off_ms: fs + stance,
                next_foot_strike_ms: fs + period,
                stance_s: stance / 1000.0,
                swing_s: swing / 1000.0,
                cycle_s: period / 1000.0,
                step_length_m: profile.cycle_length_m / 2.0,
                cycle_length_m: profile.cycle_length_m,
                speed_mps: profile.cycle_length_m / (period / 1000.0),
                overload_factor: profile.overload_factor(k),
            }
        })
        .collect();
    let truth = GroundTruth {
        trial_id: trial_fingerprint(&frames),
        seed,
        profile: profile.clone(),
        cycles,
        cadence_cycles_per_min: profile.cadence_cycles_per_min,
        cadence_steps_per_min: 2.0 * profile.cadence_cycles_per_min,
        mean_pressure_n_cm2: if count > 0 {
            sum / count as f64 / DEFAULT_CONTACT_AREA_CM2
        } else {
            0.0
        },
        contact_area_cm2: DEFAULT_CONTACT_AREA_CM2,
    };
    Ok((frames, truth))
}

fn map_forces(frames: &mut [SensorFrame], cal: &CalibrationProfile, r_min: f64, mut f: impl FnMut(usize, f64) -> u16) {
    for frame in frames {
        for ch in 0..FSR_CHANNELS {
            let force = raw_to_force(frame.fsr_raw[ch], cal, r_min).unwrap_or(0.0);
            frame.fsr_raw[ch] = f(ch, force);
        }
    }
}

/// Gaussian noise on every channel. Forces are clamped at zero.
pub fn add_noise(
    frames: &mut [SensorFrame],
    noise: &NoiseProfile,
    cal: &CalibrationProfile,
    r_min_ohm: f64,
    rng: &mut ChaCha8Rng,
) {
    if noise.force_sd_n > 0.0 {
        let d = Normal::new(0.0, noise.force_sd_n).expect("sd checked");
        map_forces(frames, cal, r_min_ohm, |_, f| {
            force_to_raw((f + d.sample(rng)).max(0.0), cal, r_min_ohm)
        });
    }
    for (sd, is_accel) in [(noise.accel_sd, true), (noise.gyro_sd, false)] {
        if sd > 0.0 {
            let d = Normal::new(0.0, sd).expect("sd checked");
            for frame in frames.iter_mut() {
                let axes = if is_accel { &mut frame.accel } else { &mut frame.gyro };
                axes.iter_mut().for_each(|v| *v += d.sample(rng));
            }
        }
    }
}

/// Holds one channel at or above `offset_n`, the residual a hysteretic FSR
/// shows after unloading.
pub fn add_stuck_channel(frames: &mut [SensorFrame], stuck: StuckChannel, cal: &CalibrationProfile, r_min_ohm: f64) {
    let floor = force_to_raw_ceil(stuck.offset_n, cal, r_min_ohm);
    for frame in frames {
        let raw = &mut frame.fsr_raw[stuck.channel];
        *raw = (*raw).max(floor);
    }
}

/// Scales the stance forces of one cycle after synthesis.
pub fn inject_overload(
    frames: &mut [SensorFrame],
    truth: &mut GroundTruth,
    cycle_index: usize,
    factor: f64,
) -> Result<(), SimError> {
    if !(factor > 1.0) {
        return Err(SimError::InvalidFactor(factor));
    }
    let cycles = truth.cycles.len();
    let cycle = truth.cycles.get_mut(cycle_index).ok_or(SimError::CycleOutOfRange {
        index: cycle_index,
        cycles,
    })?;
    let (start, end) = (cycle.foot_strike_ms, cycle.foot_off_ms);
    cycle.overload_factor *= factor;
    let cal = CalibrationProfile {
        body_weight_n: truth.profile.body_weight_n,
        ..CalibrationProfile::default()
    };
    let r_min = crate::signal::ConditioningConfig::default().fsr_r_min_ohm;
    let lo = frames.partition_point(|f| (f.timestamp_ms as f64) < start);
    let hi = frames.partition_point(|f| (f.timestamp_ms as f64) <= end);
    map_forces(&mut frames[lo..hi], &cal, r_min, |_, f| {
        force_to_raw(f * factor, &cal, r_min)
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total_force(frame: &SensorFrame) -> f64 {
        let cal = CalibrationProfile::default();
        frame
            .fsr_raw
            .iter()
            .map(|&r| raw_to_force(r, &cal, 250.0).unwrap())
            .sum()
    }

    #[test]
    fn default_trial_has_ten_cycles_at_closed_form_times() {
        let (frames, truth) = synthesize_trial(&SimProfile::default(), 1).unwrap();
        assert_eq!(truth.cycles.len(), 10);
        for (k, c) in truth.cycles.iter().enumerate() {
            assert_eq!(c.foot_strike_ms, 1000.0 + 1000.0 * k as f64);
            assert_eq!(c.foot_off_ms, c.foot_strike_ms + 600.0);
            assert_eq!(c.next_foot_strike_ms, c.foot_strike_ms + 1000.0);
            assert_eq!(c.stance_s + c.swing_s, c.cycle_s);
            assert!((c.speed_mps - c.cycle_length_m / c.cycle_s).abs() < 1e-15);
        }
        assert_eq!(frames.first().unwrap().timestamp_ms, 0);
        assert_eq!(frames.last().unwrap().timestamp_ms, 11_500);
        for w in frames.windows(2) {
            assert_eq!(w[1].timestamp_ms - w[0].timestamp_ms, 10);
        }
        let walking: f64 = truth.cycles.iter().map(|c| c.cycle_s).sum();
        assert!(walking <= truth.profile.trial_duration_s + 1e-9);
    }

    #[test]
    fn plateau_carries_body_weight() {
        let profile = SimProfile {
            ripple_n: 0.2,
            ..Default::default()
        };
        let (frames, _) = synthesize_trial(&profile, 3).unwrap();
        // Plateau of cycle 0: after the rise, before the fall.
        for f in frames.iter().filter(|f| (1100..=1450).contains(&f.timestamp_ms)) {
            let total = total_force(f);
            assert!((total - 8.0).abs() <= 0.2 + 0.05, "{} at {}", total, f.timestamp_ms);
        }
    }

    #[test]
    fn quantized_forces_never_exceed_truth() {
        let cal = CalibrationProfile::default();
        for i in 0..2000 {
            let f = i as f64 * 0.01;
            let raw = force_to_raw(f, &cal, 250.0);
            assert!(raw_to_force(raw, &cal, 250.0).unwrap() <= f);
            if raw < 4095 {
                assert!(raw_to_force(raw + 1, &cal, 250.0).unwrap() > f);
            }
        }
    }

    #[test]
    fn swing_kinematics_integrate_to_cycle_length() {
        let kin = SwingKinematics {
            length: 0.4,
            height: 0.05,
            pitch: 0.2,
            duration_s: 0.4,
        };
        // Double trapezoid integration of the analytic acceleration.
        let n = 4000;
        let h = 1.0 / n as f64;
        let (mut v, mut x, mut vz, mut z) = (0.0, 0.0, 0.0, 0.0);
        let mut prev = kin.at(0.0).1;
        for i in 1..=n {
            let a = kin.at(i as f64 * h).1;
            let dt = h * kin.duration_s;
            let nv = v + 0.5 * (prev.x + a.x) * dt;
            let nvz = vz + 0.5 * (prev.z + a.z) * dt;
            x += 0.5 * (v + nv) * dt;
            z += 0.5 * (vz + nvz) * dt;
            v = nv;
            vz = nvz;
            prev = a;
        }
        assert!((x - 0.4).abs() < 1e-6, "{x}");
        assert!(z.abs() < 1e-6 && v.abs() < 1e-9 && vz.abs() < 1e-9);
        assert!((kin.at(1.0).0 - 0.4).abs() < 1e-12);
    }

    #[test]
    fn deterministic_per_seed() {
        let profile = SimProfile {
            noise: NoiseProfile {
                force_sd_n: 0.2,
                accel_sd: 0.1,
                gyro_sd: 0.01,
            },
            ..Default::default()
        };
        let (a, ta) = synthesize_trial(&profile, 7).unwrap();
        let (b, tb) = synthesize_trial(&profile, 7).unwrap();
        let (c, _) = synthesize_trial(&profile, 8).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_noise_leaves_stream_unchanged() {
        let (mut frames, _) = synthesize_trial(&SimProfile::default(), 1).unwrap();
        let before = frames.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        add_noise(
            &mut frames,
            &NoiseProfile::default(),
            &CalibrationProfile::default(),
            250.0,
            &mut rng,
        );
        assert_eq!(frames, before);
    }

    #[test]
    fn stuck_channel_holds_offset() {
        let profile = SimProfile {
            stuck_channel: Some(StuckChannel {
                channel: 3,
                offset_n: 0.5,
            }),
            ..Default::default()
        };
        let (frames, _) = synthesize_trial(&profile, 1).unwrap();
        let cal = CalibrationProfile::default();
        let min = frames
            .iter()
            .map(|f| raw_to_force(f.fsr_raw[3], &cal, 250.0).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(min >= 0.5, "{min}");
    }

    #[test]
    fn overload_injection() {
        let (mut frames, mut truth) = synthesize_trial(&SimProfile::default(), 1).unwrap();
        let clean = frames.clone();
        assert_eq!(
            inject_overload(&mut frames, &mut truth, 2, 1.0),
            Err(SimError::InvalidFactor(1.0))
        );
        assert!(matches!(
            inject_overload(&mut frames, &mut truth, 10, 1.3),
            Err(SimError::CycleOutOfRange { .. })
        ));
        inject_overload(&mut frames, &mut truth, 2, 1.3).unwrap();
        assert_eq!(truth.cycles[2].overload_factor, 1.3);
        for (a, b) in frames.iter().zip(&clean) {
            let in_cycle = (3000..=3600).contains(&a.timestamp_ms);
            if !in_cycle {
                assert_eq!(a, b);
            } else if total_force(b) > 1.0 {
                assert!(total_force(a) > 1.25 * total_force(b));
            }
        }
    }

    #[test]
    fn profile_validation() {
        let bad = SimProfile {
            stance_fraction: 1.0,
            ..Default::default()
        };
        assert!(synthesize_trial(&bad, 0).is_err());
        let bad = SimProfile {
            trial_duration_s: 0.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
