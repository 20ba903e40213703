//! Binary packet framing.
//!
//! ```text
//! 0      2        3     4          5            7             7+n   9+n
//! | "GC" | version | type | device_id | len (u16 LE) | payload | crc16 (LE) |
//! ```
//!
//! The CRC is CRC-16/CCITT-FALSE over header and payload.

use crc::{Crc, CRC_16_IBM_3740};
use sha2::{Digest, Sha256};

use super::TelemetryError;
use crate::events::{GaitEvent, GaitEventKind};
use crate::feedback::{ActuatorTarget, FeedbackMode, VibrationCommand};
use crate::types::{SensorFrame, FSR_CHANNELS, STANDARD_GRAVITY};

pub const MAGIC: [u8; 2] = *b"GC";
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 7;
pub const CRC_LEN: usize = 2;
pub const FRAME_PAYLOAD_LEN: usize = 50;
pub const COMMAND_PAYLOAD_LEN: usize = 24;
pub const EVENT_PAYLOAD_LEN: usize = 9;

/// Accelerometer counts per g.
pub const ACCEL_COUNTS_PER_G: f64 = 1000.0;
/// Gyroscope counts per degree/second.
pub const GYRO_COUNTS_PER_DPS: f64 = 16.0;
pub const ACCEL_RANGE_G: f64 = 4.0;
pub const GYRO_RANGE_DPS: f64 = 2000.0;

/// Absorbs unit-conversion rounding at the range limits.
const RANGE_SLACK: f64 = 1e-9;

const CRC16: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);

pub fn crc16(bytes: &[u8]) -> u16 {
    CRC16.checksum(bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PacketType {
    SensorFrame = 0x01,
    VibrationCommand = 0x02,
    GaitEvent = 0x03,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payload {
    Frame(SensorFrame),
    Command(VibrationCommand),
    Event(GaitEvent),
}

impl Payload {
    pub fn packet_type(&self) -> PacketType {
        match self {
            Payload::Frame(_) => PacketType::SensorFrame,
            Payload::Command(_) => PacketType::VibrationCommand,
            Payload::Event(_) => PacketType::GaitEvent,
        }
    }

    pub fn timestamp_ms(&self) -> u64 {
        match self {
            Payload::Frame(f) => f.timestamp_ms,
            Payload::Command(c) => c.timestamp_ms,
            Payload::Event(e) => e.timestamp_ms,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetryPacket {
    pub device_id: u8,
    pub payload: Payload,
}

fn accel_counts(v: f64) -> Result<i16, TelemetryError> {
    let g = v / STANDARD_GRAVITY;
    if !(g.abs() <= ACCEL_RANGE_G + RANGE_SLACK) {
        return Err(TelemetryError::ValueOutOfEncodableRange {
            field: "accel",
            value: v,
        });
    }
    Ok((g * ACCEL_COUNTS_PER_G).round() as i16)
}

fn gyro_counts(v: f64) -> Result<i16, TelemetryError> {
    let dps = v.to_degrees();
    if !(dps.abs() <= GYRO_RANGE_DPS + RANGE_SLACK) {
        return Err(TelemetryError::ValueOutOfEncodableRange {
            field: "gyro",
            value: v,
        });
    }
    Ok((dps * GYRO_COUNTS_PER_DPS).round() as i16)
}

fn accel_from_counts(n: i16) -> f64 {
    n as f64 / ACCEL_COUNTS_PER_G * STANDARD_GRAVITY
}

fn gyro_from_counts(n: i16) -> f64 {
    (n as f64 / GYRO_COUNTS_PER_DPS).to_radians()
}

/// Snaps the inertial channels onto the wire grid, saturating at the
/// encodable range. Decoding the encoded result reproduces the output exactly.
pub fn quantize_imu(frame: &SensorFrame) -> SensorFrame {
    let accel_max = ACCEL_RANGE_G * STANDARD_GRAVITY;
    let gyro_max = GYRO_RANGE_DPS.to_radians();
    let mut out = *frame;
    for axis in 0..3 {
        let a = frame.accel[axis].clamp(-accel_max, accel_max);
        out.accel[axis] = accel_from_counts(accel_counts(a).unwrap_or(0));
        let g = frame.gyro[axis].clamp(-gyro_max, gyro_max);
        out.gyro[axis] = gyro_from_counts(gyro_counts(g).unwrap_or(0));
    }
    out
}

fn frame_payload(frame: &SensorFrame) -> Result<Vec<u8>, TelemetryError> {
    let mut p = Vec::with_capacity(FRAME_PAYLOAD_LEN);
    p.extend_from_slice(&frame.timestamp_ms.to_le_bytes());
    for raw in frame.fsr_raw {
        p.extend_from_slice(&raw.to_le_bytes());
    }
    for a in frame.accel {
        p.extend_from_slice(&accel_counts(a)?.to_le_bytes());
    }
    for g in frame.gyro {
        p.extend_from_slice(&gyro_counts(g)?.to_le_bytes());
    }
    Ok(p)
}

fn command_payload(cmd: &VibrationCommand) -> Result<Vec<u8>, TelemetryError> {
    if !(0.0..=1.0).contains(&cmd.intensity) {
        return Err(TelemetryError::ValueOutOfEncodableRange {
            field: "intensity",
            value: cmd.intensity,
        });
    }
    let mut p = Vec::with_capacity(COMMAND_PAYLOAD_LEN);
    p.extend_from_slice(&cmd.timestamp_ms.to_le_bytes());
    p.push(cmd.target.code());
    p.push(cmd.mode.code());
    p.extend_from_slice(&((cmd.intensity * 10_000.0).round() as u16).to_le_bytes());
    p.extend_from_slice(&cmd.pulse_on_ms.to_le_bytes());
    p.extend_from_slice(&cmd.pulse_off_ms.to_le_bytes());
    p.extend_from_slice(&cmd.duration_ms.to_le_bytes());
    Ok(p)
}

fn event_payload(event: &GaitEvent) -> Vec<u8> {
    let mut p = Vec::with_capacity(EVENT_PAYLOAD_LEN);
    p.extend_from_slice(&event.timestamp_ms.to_le_bytes());
    p.push(event.kind.code());
    p
}

pub fn encode_packet(packet: &TelemetryPacket) -> Result<Vec<u8>, TelemetryError> {
    let payload = match &packet.payload {
        Payload::Frame(f) => frame_payload(f)?,
        Payload::Command(c) => command_payload(c)?,
        Payload::Event(e) => event_payload(e),
    };
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + CRC_LEN);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(packet.payload.packet_type() as u8);
    out.push(packet.device_id);
    out.extend_from_slice(&(payload.len() as u16).to_le_bytes());
    out.extend_from_slice(&payload);
    let crc = crc16(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Sensor frame packet; the header carries the frame's device id.
pub fn encode_sensor_frame(frame: &SensorFrame) -> Result<Vec<u8>, TelemetryError> {
    encode_packet(&TelemetryPacket {
        device_id: frame.device_id,
        payload: Payload::Frame(*frame),
    })
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let out: [u8; N] = self.bytes[self.pos..self.pos + N].try_into().expect("length checked");
        self.pos += N;
        out
    }

    fn u8(&mut self) -> u8 {
        self.take::<1>()[0]
    }

    fn u16(&mut self) -> u16 {
        u16::from_le_bytes(self.take())
    }

    fn i16(&mut self) -> i16 {
        i16::from_le_bytes(self.take())
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }

    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take())
    }
}

fn expect_len(payload: &[u8], expected: usize) -> Result<(), TelemetryError> {
    if payload.len() == expected {
        Ok(())
    } else {
        Err(TelemetryError::InvalidPayload(format!(
            "expected {expected} payload bytes, found {}",
            payload.len()
        )))
    }
}

/// Checks integrity first (CRC over everything but the trailer), then
/// structure: magic, version, declared length, payload.
pub fn decode_packet(bytes: &[u8]) -> Result<TelemetryPacket, TelemetryError> {
    let min = HEADER_LEN + CRC_LEN;
    if bytes.len() < min {
        return Err(TelemetryError::TruncatedInput {
            needed: min,
            available: bytes.len(),
        });
    }
    let (body, trailer) = bytes.split_at(bytes.len() - CRC_LEN);
    let expected = u16::from_le_bytes([trailer[0], trailer[1]]);
    let computed = crc16(body);
    if expected != computed {
        return Err(TelemetryError::CrcMismatch { expected, computed });
    }

    if body[0..2] != MAGIC {
        return Err(TelemetryError::BadMagic([body[0], body[1]]));
    }
    if body[2] != VERSION {
        return Err(TelemetryError::UnsupportedVersion(body[2]));
    }
    let packet_type = body[3];
    let device_id = body[4];
    let declared = u16::from_le_bytes([body[5], body[6]]) as usize;
    let payload = &body[HEADER_LEN..];
    if declared > payload.len() {
        return Err(TelemetryError::TruncatedInput {
            needed: HEADER_LEN + declared + CRC_LEN,
            available: bytes.len(),
        });
    }
    if declared < payload.len() {
        return Err(TelemetryError::LengthMismatch {
            declared,
            actual: payload.len(),
        });
    }

    let mut r = Reader { bytes: payload, pos: 0 };
    let payload = match packet_type {
        0x01 => {
            expect_len(payload, FRAME_PAYLOAD_LEN)?;
            let timestamp_ms = r.u64();
            let mut fsr_raw = [0u16; FSR_CHANNELS];
            for slot in &mut fsr_raw {
                *slot = r.u16();
            }
            let accel = [(); 3].map(|_| accel_from_counts(r.i16()));
            let gyro = [(); 3].map(|_| gyro_from_counts(r.i16()));
            Payload::Frame(SensorFrame {
                timestamp_ms,
                fsr_raw,
                accel,
                gyro,
                device_id,
            })
        }
        0x02 => {
            expect_len(payload, COMMAND_PAYLOAD_LEN)?;
            let timestamp_ms = r.u64();
            let target = r.u8();
            let target = ActuatorTarget::from_code(target)
                .ok_or_else(|| TelemetryError::InvalidPayload(format!("unknown actuator {target}")))?;
            let mode = r.u8();
            let mode = FeedbackMode::from_code(mode)
                .ok_or_else(|| TelemetryError::InvalidPayload(format!("unknown mode {mode}")))?;
            let intensity = r.u16() as f64 / 10_000.0;
            if intensity > 1.0 {
                return Err(TelemetryError::InvalidPayload(format!("intensity {intensity} > 1")));
            }
            Payload::Command(VibrationCommand {
                timestamp_ms,
                target,
                mode,
                intensity,
                pulse_on_ms: r.u32(),
                pulse_off_ms: r.u32(),
                duration_ms: r.u32(),
            })
        }
        0x03 => {
            expect_len(payload, EVENT_PAYLOAD_LEN)?;
            let timestamp_ms = r.u64();
            let code = r.u8();
            let kind = GaitEventKind::from_code(code)
                .ok_or_else(|| TelemetryError::InvalidPayload(format!("unknown event kind {code}")))?;
            Payload::Event(GaitEvent { kind, timestamp_ms })
        }
        other => return Err(TelemetryError::UnknownPacketType(other)),
    };
    Ok(TelemetryPacket { device_id, payload })
}

/// Timestamp field of any packet type, read without a full decode.
pub fn packet_timestamp_ms(bytes: &[u8]) -> Option<u64> {
    let field = bytes.get(HEADER_LEN..HEADER_LEN + 8)?;
    Some(u64::from_le_bytes(field.try_into().ok()?))
}

/// Short content fingerprint of a trial: the first 16 hex digits of the
/// SHA-256 over the frames' wire encoding (inertial values saturated).
/// The device id is left out so a trial keeps its id through the CSV format.
pub fn trial_fingerprint(frames: &[SensorFrame]) -> String {
    let mut hasher = Sha256::new();
    for f in frames {
        let frame = SensorFrame {
            device_id: 0,
            ..quantize_imu(f)
        };
        let bytes = encode_sensor_frame(&frame).expect("quantized frames are encodable");
        hasher.update(&bytes);
    }
    let digest = hasher.finalize();
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}
