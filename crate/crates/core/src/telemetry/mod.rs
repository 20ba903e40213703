//! Wire format, topics, transports and trial recordings.

use thiserror::Error;

pub mod bus;
pub mod mqtt;
pub mod packet;
pub mod record;
pub mod topic;

pub use bus::{LoopbackBus, Message, Transport};
pub use mqtt::MqttPublisher;
pub use packet::{
    decode_packet, encode_packet, encode_sensor_frame, quantize_imu, trial_fingerprint, PacketType, Payload,
    TelemetryPacket,
};
pub use record::{
    read_recorded_frames, record_frames, record_trial, replay_trial, RecordingReader, RecordingWriter, Replay,
};
pub use topic::{topic_for, Device, Stream, Topic};

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("{field} value {value} is outside the encodable range")]
    ValueOutOfEncodableRange { field: &'static str, value: f64 },
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 2]),
    #[error("unsupported protocol version {0}")]
    UnsupportedVersion(u8),
    #[error("declared payload length {declared} but {actual} bytes present")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("crc mismatch: packet says {expected:#06x}, computed {computed:#06x}")]
    CrcMismatch { expected: u16, computed: u16 },
    #[error("truncated input: need {needed} bytes, have {available}")]
    TruncatedInput { needed: usize, available: usize },
    #[error("unknown packet type {0:#04x}")]
    UnknownPacketType(u8),
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
    #[error("invalid topic `{0}`")]
    InvalidTopic(String),
    #[error("replay speed must be a finite value >= 0, got {0}")]
    InvalidSpeed(f64),
    #[error("corrupt recording at byte {offset} after {packets_read} packets")]
    CorruptRecording { offset: u64, packets_read: usize },
    #[error("transport unavailable: {0}")]
    TransportUnavailable(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PartialEq for TelemetryError {
    fn eq(&self, other: &Self) -> bool {
        use TelemetryError::*;
        match (self, other) {
            (ValueOutOfEncodableRange { field: a, value: x }, ValueOutOfEncodableRange { field: b, value: y }) => {
                a == b && x.to_bits() == y.to_bits()
            }
            (BadMagic(a), BadMagic(b)) => a == b,
            (UnsupportedVersion(a), UnsupportedVersion(b)) => a == b,
            (LengthMismatch { declared: a, actual: x }, LengthMismatch { declared: b, actual: y }) => a == b && x == y,
            (
                CrcMismatch {
                    expected: a,
                    computed: x,
                },
                CrcMismatch {
                    expected: b,
                    computed: y,
                },
            ) => a == b && x == y,
            (
                TruncatedInput {
                    needed: a,
                    available: x,
                },
                TruncatedInput {
                    needed: b,
                    available: y,
                },
            ) => a == b && x == y,
            (UnknownPacketType(a), UnknownPacketType(b)) => a == b,
            (InvalidPayload(a), InvalidPayload(b)) => a == b,
            (InvalidTopic(a), InvalidTopic(b)) => a == b,
            (InvalidSpeed(a), InvalidSpeed(b)) => a.to_bits() == b.to_bits(),
            (
                CorruptRecording {
                    offset: a,
                    packets_read: x,
                },
                CorruptRecording {
                    offset: b,
                    packets_read: y,
                },
            ) => a == b && x == y,
            (TransportUnavailable(a), TransportUnavailable(b)) => a == b,
            (Io(a), Io(b)) => a.kind() == b.kind(),
            _ => false,
        }
    }
}
