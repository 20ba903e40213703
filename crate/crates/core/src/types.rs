//! Shared domain vocabulary: raw sensor frames, calibration, and the
//! anatomical layout of the insole's force sensors.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of FSR channels the engine consumes.
pub const FSR_CHANNELS: usize = 15;
/// Largest insole layout that is accepted on input (extra channels are ignored).
pub const MAX_FSR_CHANNELS: usize = 24;
/// Full-scale count of the 12-bit ADC.
pub const ADC_MAX: u16 = 4095;
/// Standard gravity in m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;
/// Nominal acquisition period at 100 Hz.
pub const NOMINAL_PERIOD_MS: u64 = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("expected at least {expected} FSR channels, found {found}")]
    ChannelCountMismatch { expected: usize, found: usize },
    #[error("ADC count {value} on channel {channel} exceeds {max}", max = ADC_MAX)]
    AdcOutOfRange { channel: usize, value: u16 },
    #[error("timestamp {current} ms does not follow previous {previous} ms")]
    NonMonotonicTimestamp { previous: u64, current: u64 },
}

/// One synchronized 100 Hz sample from the orthosis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub timestamp_ms: u64,
    pub fsr_raw: [u16; FSR_CHANNELS],
    /// Specific force in the sensor frame, m/s².
    pub accel: [f64; 3],
    /// Angular rate in the sensor frame, rad/s.
    pub gyro: [f64; 3],
    pub device_id: u8,
}

impl SensorFrame {
    /// Builds a frame from a channel slice of the 15..=24 channel layouts,
    /// keeping the first 15 channels.
    pub fn from_channels(
        timestamp_ms: u64,
        channels: &[u16],
        accel: [f64; 3],
        gyro: [f64; 3],
        device_id: u8,
    ) -> Result<Self, FrameError> {
        if channels.len() < FSR_CHANNELS || channels.len() > MAX_FSR_CHANNELS {
            return Err(FrameError::ChannelCountMismatch {
                expected: FSR_CHANNELS,
                found: channels.len(),
            });
        }
        let mut fsr_raw = [0u16; FSR_CHANNELS];
        fsr_raw.copy_from_slice(&channels[..FSR_CHANNELS]);
        Ok(Self {
            timestamp_ms,
            fsr_raw,
            accel,
            gyro,
            device_id,
        })
    }
}

/// Checks ADC bounds and strict timestamp ordering against the previous frame
/// of the same stream.
pub fn validate_frame(frame: &SensorFrame, prev_timestamp: Option<u64>) -> Result<(), FrameError> {
    if let Some((channel, &value)) = frame.fsr_raw.iter().enumerate().find(|(_, &v)| v > ADC_MAX) {
        return Err(FrameError::AdcOutOfRange { channel, value });
    }
    match prev_timestamp {
        Some(previous) if frame.timestamp_ms <= previous => Err(FrameError::NonMonotonicTimestamp {
            previous,
            current: frame.timestamp_ms,
        }),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("calibration field `{field}` must be positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("static accelerometer bias {value} m/s² on axis {axis} exceeds the 2 m/s² sanity bound")]
    AccelBiasTooLarge { axis: usize, value: f64 },
}

/// Electrical and subject parameters needed to turn raw counts into forces.
///
/// `body_weight` is expressed in the same force units as the summed FSR
/// estimate, i.e. the share of body weight the 15 sensing areas actually see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationProfile {
    pub supply_voltage: f64,
    pub reference_resistor_ohm: f64,
    pub adc_full_scale: u16,
    pub fsr_force_max_n: f64,
    pub body_weight_n: f64,
    pub accel_bias: [f64; 3],
    pub gyro_bias: [f64; 3],
    pub accel_range_g: f64,
    pub gyro_range_dps: f64,
}

impl Default for CalibrationProfile {
    fn default() -> Self {
        Self {
            supply_voltage: 3.3,
            reference_resistor_ohm: 10_000.0,
            adc_full_scale: ADC_MAX,
            fsr_force_max_n: 20.0,
            body_weight_n: 8.0,
            accel_bias: [0.0; 3],
            gyro_bias: [0.0; 3],
            accel_range_g: 4.0,
            gyro_range_dps: 2000.0,
        }
    }
}

impl CalibrationProfile {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        let positive = [
            ("supply_voltage", self.supply_voltage),
            ("reference_resistor_ohm", self.reference_resistor_ohm),
            ("adc_full_scale", f64::from(self.adc_full_scale)),
            ("fsr_force_max_n", self.fsr_force_max_n),
            ("body_weight_n", self.body_weight_n),
            ("accel_range_g", self.accel_range_g),
            ("gyro_range_dps", self.gyro_range_dps),
        ];
        for (field, value) in positive {
            if !(value > 0.0) {
                return Err(CalibrationError::NonPositive { field, value });
            }
        }
        if let Some((axis, &value)) = self.accel_bias.iter().enumerate().find(|(_, b)| b.abs() >= 2.0) {
            return Err(CalibrationError::AccelBiasTooLarge { axis, value });
        }
        Ok(())
    }

    /// Accelerometer clamp in m/s².
    pub fn accel_limit(&self) -> f64 {
        self.accel_range_g * STANDARD_GRAVITY
    }

    /// Gyroscope clamp in rad/s.
    pub fn gyro_limit(&self) -> f64 {
        self.gyro_range_dps.to_radians()
    }
}

/// Anatomical regions of the foot sole.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    Heel,
    Midfoot,
    Metatarsal,
    Toes,
}

impl Region {
    pub const ALL: [Region; 4] = [Region::Heel, Region::Midfoot, Region::Metatarsal, Region::Toes];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_forefoot(self) -> bool {
        matches!(self, Region::Metatarsal | Region::Toes)
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Region::Heel => "heel",
            Region::Midfoot => "midfoot",
            Region::Metatarsal => "metatarsal",
            Region::Toes => "toes",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegionError {
    #[error("channel {0} is outside 0..{FSR_CHANNELS}")]
    ChannelOutOfRange(usize),
}

/// Channel-to-region assignment plus sensor positions on a normalized insole.
///
/// Coordinates live in the unit box: x across the foot (medial at 0 for a
/// right insole), y from heel (0) to toe (1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMap {
    pub regions: [Region; FSR_CHANNELS],
    pub coords: [[f64; 2]; FSR_CHANNELS],
}

impl Default for RegionMap {
    /// Areas 1-3 heel, 4-5 midfoot, 6-10 metatarsals, 11-15 toes. Positions
    /// approximate the published sensor layout.
    fn default() -> Self {
        use Region::*;
        Self {
            regions: [
                Heel, Heel, Heel, Midfoot, Midfoot, Metatarsal, Metatarsal, Metatarsal, Metatarsal, Metatarsal, Toes,
                Toes, Toes, Toes, Toes,
            ],
            coords: [
                [0.42, 0.08],
                [0.58, 0.08],
                [0.50, 0.18],
                [0.62, 0.38],
                [0.62, 0.50],
                [0.24, 0.70],
                [0.37, 0.70],
                [0.50, 0.69],
                [0.63, 0.67],
                [0.76, 0.64],
                [0.28, 0.90],
                [0.43, 0.92],
                [0.55, 0.91],
                [0.67, 0.88],
                [0.77, 0.84],
            ],
        }
    }
}

impl RegionMap {
    pub fn region_of(&self, channel: usize) -> Result<Region, RegionError> {
        self.regions
            .get(channel)
            .copied()
            .ok_or(RegionError::ChannelOutOfRange(channel))
    }

    pub fn channels_in(&self, region: Region) -> impl Iterator<Item = usize> + '_ {
        self.regions
            .iter()
            .enumerate()
            .filter(move |(_, &r)| r == region)
            .map(|(i, _)| i)
    }

    /// Sums per-channel values into the four regions, indexed by [`Region::index`].
    pub fn region_sums(&self, values: &[f64; FSR_CHANNELS]) -> [f64; 4] {
        let mut sums = [0.0; 4];
        for (value, region) in values.iter().zip(self.regions.iter()) {
            sums[region.index()] += value;
        }
        sums
    }
}

/// Half-width knots of the normalized insole outline, `(y, half_width)`.
const OUTLINE_KNOTS: [(f64, f64); 10] = [
    (0.00, 0.10),
    (0.04, 0.18),
    (0.12, 0.22),
    (0.30, 0.21),
    (0.45, 0.22),
    (0.60, 0.36),
    (0.72, 0.42),
    (0.85, 0.40),
    (0.95, 0.28),
    (1.00, 0.12),
];

/// True when the normalized point lies on the insole outline.
pub fn insole_contains(x: f64, y: f64) -> bool {
    if !(0.0..=1.0).contains(&y) || !(0.0..=1.0).contains(&x) {
        return false;
    }
    let half_width = OUTLINE_KNOTS
        .windows(2)
        .find(|w| y >= w[0].0 && y <= w[1].0)
        .map(|w| {
            let t = (y - w[0].0) / (w[1].0 - w[0].0);
            w[0].1 + t * (w[1].1 - w[0].1)
        })
        .unwrap_or(0.0);
    (x - 0.5).abs() <= half_width
}

#[derive(Debug, Error)]
pub enum CsvFormatError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: cannot parse `{column}` from {value:?}")]
    BadValue { row: usize, column: String, value: String },
    #[error("row {row}: {source}")]
    Frame { row: usize, source: FrameError },
}

fn frame_csv_header() -> Vec<String> {
    let mut header = vec!["timestamp_ms".to_string()];
    header.extend((0..FSR_CHANNELS).map(|i| format!("fsr{i}")));
    header.extend(["ax", "ay", "az", "gx", "gy", "gz"].map(String::from));
    header
}

/// Writes frames in the `timestamp_ms,fsr0..fsr14,ax,ay,az,gx,gy,gz` layout.
pub fn write_frames_csv<W: Write>(writer: W, frames: &[SensorFrame]) -> Result<(), CsvFormatError> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(frame_csv_header())?;
    for frame in frames {
        let mut row = Vec::with_capacity(22);
        row.push(frame.timestamp_ms.to_string());
        row.extend(frame.fsr_raw.iter().map(|c| c.to_string()));
        row.extend(frame.accel.iter().chain(frame.gyro.iter()).map(|v| v.to_string()));
        out.write_record(&row)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads frames by header name; unknown columns (e.g. `fsr15`..`fsr23`) are ignored.
pub fn read_frames_csv<R: Read>(reader: R) -> Result<Vec<SensorFrame>, CsvFormatError> {
    let mut input = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = input.headers()?.clone();
    let columns: Vec<usize> = frame_csv_header()
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| CsvFormatError::MissingColumn(name.clone()))
        })
        .collect::<Result<_, _>>()?;

    let mut frames = Vec::new();
    let mut prev = None;
    for (row_idx, record) in input.records().enumerate() {
        let record = record?;
        let row = row_idx + 1;
        let field = |col: usize| -> (&str, &str) { (&headers[columns[col]], record.get(columns[col]).unwrap_or("")) };
        let parse_f64 = |col: usize| -> Result<f64, CsvFormatError> {
            let (name, value) = field(col);
            value.parse().map_err(|_| CsvFormatError::BadValue {
                row,
                column: name.to_string(),
                value: value.to_string(),
            })
        };
        let (name, value) = field(0);
        let timestamp_ms: u64 = value.parse().map_err(|_| CsvFormatError::BadValue {
            row,
            column: name.to_string(),
            value: value.to_string(),
        })?;
        let mut fsr = [0u16; FSR_CHANNELS];
        for (i, slot) in fsr.iter_mut().enumerate() {
            let (name, value) = field(1 + i);
            *slot = value.parse().map_err(|_| CsvFormatError::BadValue {
                row,
                column: name.to_string(),
                value: value.to_string(),
            })?;
        }
        let mut imu = [0.0; 6];
        for (i, slot) in imu.iter_mut().enumerate() {
            *slot = parse_f64(1 + FSR_CHANNELS + i)?;
        }
        let frame = SensorFrame {
            timestamp_ms,
            fsr_raw: fsr,
            accel: [imu[0], imu[1], imu[2]],
            gyro: [imu[3], imu[4], imu[5]],
            device_id: 0,
        };
        validate_frame(&frame, prev).map_err(|source| CsvFormatError::Frame { row, source })?;
        prev = Some(frame.timestamp_ms);
        frames.push(frame);
    }
    Ok(frames)
}
