//! Foot orientation and dead reckoning.
//!
//! Orientation comes from a Mahony complementary filter: gyro integration
//! corrected by the PI-filtered error between measured and estimated gravity
//! direction. Position integrates gravity-free world acceleration; while the
//! foot is flat (foot strike to heel off) velocity is clamped to zero.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::ImuFrame;
use crate::types::STANDARD_GRAVITY;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FusionError {
    #[error("time step must be positive")]
    ZeroDt,
    #[error("invalid fusion configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ZvuMode {
    #[default]
    HoldDuringStance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub kp: f64,
    pub ki: f64,
    pub gravity: f64,
    pub zvu_mode: ZvuMode,
    /// Accelerometer correction is skipped when `|‖a‖ - g| > gate·g`.
    pub accel_gate_fraction: f64,
    /// Let the accelerometer correct attitude outside the stationary window.
    /// Off by default: swing accelerations masquerade as gravity tilt.
    pub accel_correction_in_swing: bool,
    /// Initialize roll and pitch from the first accelerometer sample.
    pub align_on_first_frame: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            kp: 1.0,
            ki: 0.05,
            gravity: STANDARD_GRAVITY,
            zvu_mode: ZvuMode::HoldDuringStance,
            accel_gate_fraction: 0.3,
            accel_correction_in_swing: false,
            align_on_first_frame: true,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        if !(self.kp > 0.0) || !(self.ki >= 0.0) {
            return Err(FusionError::InvalidConfig("require Kp > 0 and Ki >= 0".into()));
        }
        if !(self.gravity > 0.0) || !(self.accel_gate_fraction >= 0.0) {
            return Err(FusionError::InvalidConfig(
                "gravity and accel gate must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationState {
    /// Sensor-to-world rotation.
    pub q: UnitQuaternion<f64>,
    pub integral_feedback: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub position: Vector3<f64>,
    pub last_timestamp_ms: Option<u64>,
}

impl Default for OrientationState {
    fn default() -> Self {
        Self {
            q: UnitQuaternion::identity(),
            integral_feedback: Vector3::zeros(),
            velocity: Vector3::zeros(),
            position: Vector3::zeros(),
            last_timestamp_ms: None,
        }
    }
}

fn accel_is_trustworthy(accel: &Vector3<f64>, cfg: &FusionConfig) -> bool {
    let norm = accel.norm();
    norm > 0.0 && (norm - cfg.gravity).abs() <= cfg.accel_gate_fraction * cfg.gravity
}

/// One Mahony step with the accelerometer correction allowed when the
/// magnitude gate passes.
pub fn mahony_update(
    state: &OrientationState,
    imu: &ImuFrame,
    cfg: &FusionConfig,
    dt: f64,
) -> Result<OrientationState, FusionError> {
    mahony_update_gated(state, imu, cfg, dt, true)
}

/// Mahony step where the caller can additionally veto the accelerometer.
pub fn mahony_update_gated(
    state: &OrientationState,
    imu: &ImuFrame,
    cfg: &FusionConfig,
    dt: f64,
    accel_allowed: bool,
) -> Result<OrientationState, FusionError> {
    if !(dt > 0.0) {
        return Err(FusionError::ZeroDt);
    }
    let accel = Vector3::from(imu.accel);
    let gyro = Vector3::from(imu.gyro);
    let mut next = *state;

    let mut error = Vector3::zeros();
    if accel_allowed && accel_is_trustworthy(&accel, cfg) {
        let measured = accel.normalize();
        // World "up" expressed in the sensor frame.
        let estimated = state.q.inverse_transform_vector(&Vector3::z());
        error = measured.cross(&estimated);
        if cfg.ki > 0.0 {
            next.integral_feedback += cfg.ki * error * dt;
        }
    }
    let omega = gyro + cfg.kp * error + next.integral_feedback;

    let q = state.q.into_inner();
    let q_dot = q * Quaternion::from_imag(omega) * 0.5;
    next.q = UnitQuaternion::from_quaternion(q + q_dot * dt);
    Ok(next)
}

/// Gravity-compensated integration with zero-velocity hold while `stance`.
pub fn zvu_integrate(
    state: &OrientationState,
    imu: &ImuFrame,
    stance: bool,
    cfg: &FusionConfig,
    dt: f64,
) -> Result<OrientationState, FusionError> {
    if !(dt > 0.0) {
        return Err(FusionError::ZeroDt);
    }
    let mut next = *state;
    if stance {
        next.velocity = Vector3::zeros();
        return Ok(next);
    }
    let world_accel = state.q.transform_vector(&Vector3::from(imu.accel)) - Vector3::new(0.0, 0.0, cfg.gravity);
    let v_prev = state.velocity;
    next.velocity = v_prev + world_accel * dt;
    next.position = state.position + (v_prev + next.velocity) * (0.5 * dt);
    Ok(next)
}

/// ZYX (yaw-pitch-roll) Euler angles in radians: `(roll, pitch, yaw)`.
pub fn to_euler(q: &UnitQuaternion<f64>) -> (f64, f64, f64) {
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    let roll = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
    let pitch = (2.0 * (w * y - z * x)).clamp(-1.0, 1.0).asin();
    let yaw = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
    (roll, pitch, yaw)
}

/// Rotation whose ZYX Euler angles are `(roll, pitch, yaw)`.
pub fn from_euler(roll: f64, pitch: f64, yaw: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw)
        * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), pitch)
        * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), roll)
}

/// Roll/pitch attitude that maps the measured specific force onto world up.
fn level_from_accel(accel: &Vector3<f64>) -> Option<UnitQuaternion<f64>> {
    let n = accel.norm();
    if n == 0.0 {
        return None;
    }
    let roll = accel.y.atan2(accel.z);
    let pitch = (-accel.x / n).clamp(-1.0, 1.0).asin();
    Some(from_euler(roll, pitch, 0.0))
}

/// One exported trajectory sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub timestamp_ms: u64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub velocity: [f64; 3],
    pub position: [f64; 3],
}

/// Per-stream fusion context.
#[derive(Debug, Clone)]
pub struct MotionTracker {
    state: OrientationState,
    cfg: FusionConfig,
}

impl MotionTracker {
    pub fn new(cfg: &FusionConfig) -> Result<Self, FusionError> {
        cfg.validate()?;
        Ok(Self {
            state: OrientationState::default(),
            cfg: cfg.clone(),
        })
    }

    pub fn state(&self) -> &OrientationState {
        &self.state
    }

    /// `stance` is the FSR-derived stationary flag for this frame.
    pub fn step(&mut self, imu: &ImuFrame, stance: bool) -> Result<TrajectoryPoint, FusionError> {
        match self.state.last_timestamp_ms {
            None => {
                let accel = Vector3::from(imu.accel);
                if self.cfg.align_on_first_frame && accel_is_trustworthy(&accel, &self.cfg) {
                    if let Some(q) = level_from_accel(&accel) {
                        self.state.q = q;
                    }
                }
            }
            Some(last) => {
                if imu.timestamp_ms <= last {
                    return Err(FusionError::ZeroDt);
                }
                let dt = (imu.timestamp_ms - last) as f64 / 1000.0;
                let accel_allowed = stance || self.cfg.accel_correction_in_swing;
                let oriented = mahony_update_gated(&self.state, imu, &self.cfg, dt, accel_allowed)?;
                self.state = zvu_integrate(&oriented, imu, stance, &self.cfg, dt)?;
            }
        }
        self.state.last_timestamp_ms = Some(imu.timestamp_ms);
        Ok(self.point())
    }

    pub fn point(&self) -> TrajectoryPoint {
        let (roll, pitch, yaw) = to_euler(&self.state.q);
        TrajectoryPoint {
            timestamp_ms: self.state.last_timestamp_ms.unwrap_or(0),
            roll,
            pitch,
            yaw,
            velocity: self.state.velocity.into(),
            position: self.state.position.into(),
        }
    }
}

/// Trajectory export: `timestamp_ms,roll,pitch,yaw,vx,vy,vz,px,py,pz` (ZYX Euler angles).
pub fn write_trajectory_csv<W: std::io::Write>(writer: W, points: &[TrajectoryPoint]) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record([
        "timestamp_ms",
        "roll",
        "pitch",
        "yaw",
        "vx",
        "vy",
        "vz",
        "px",
        "py",
        "pz",
    ])?;
    for p in points {
        let mut row = vec![p.timestamp_ms.to_string()];
        row.extend(
            [p.roll, p.pitch, p.yaw]
                .iter()
                .chain(p.velocity.iter())
                .chain(p.position.iter())
                .map(|v| v.to_string()),
        );
        out.write_record(&row)?;
    }
    out.flush()
}
