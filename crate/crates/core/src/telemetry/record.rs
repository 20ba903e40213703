//! Trial recordings: `GCREC001` followed by `[u32 LE length][packet]` records.

use std::io::{self, Read, Write};
use std::thread;
use std::time::{Duration, Instant};

use super::packet::{decode_packet, encode_sensor_frame, packet_timestamp_ms, Payload};
use super::TelemetryError;
use crate::types::SensorFrame;

pub const RECORDING_MAGIC: [u8; 8] = *b"GCREC001";

/// Upper bound on a single record; anything larger is treated as corruption.
const MAX_RECORD_LEN: usize = 64 * 1024;

pub struct RecordingWriter<W: Write> {
    sink: W,
    packets: usize,
}

impl<W: Write> RecordingWriter<W> {
    pub fn new(mut sink: W) -> Result<Self, TelemetryError> {
        sink.write_all(&RECORDING_MAGIC)?;
        Ok(Self { sink, packets: 0 })
    }

    pub fn write_packet(&mut self, packet: &[u8]) -> Result<(), TelemetryError> {
        self.sink.write_all(&(packet.len() as u32).to_le_bytes())?;
        self.sink.write_all(packet)?;
        self.packets += 1;
        Ok(())
    }

    pub fn packets_written(&self) -> usize {
        self.packets
    }

    pub fn finish(mut self) -> Result<W, TelemetryError> {
        self.sink.flush()?;
        Ok(self.sink)
    }
}

pub fn record_trial<W, I>(packets: I, sink: W) -> Result<usize, TelemetryError>
where
    W: Write,
    I: IntoIterator,
    I::Item: AsRef<[u8]>,
{
    let mut writer = RecordingWriter::new(sink)?;
    for p in packets {
        writer.write_packet(p.as_ref())?;
    }
    let n = writer.packets_written();
    writer.finish()?;
    Ok(n)
}

/// Records a frame trial, one frame packet per sample.
pub fn record_frames<W: Write>(frames: &[SensorFrame], sink: W) -> Result<usize, TelemetryError> {
    let packets = frames.iter().map(encode_sensor_frame).collect::<Result<Vec<_>, _>>()?;
    record_trial(&packets, sink)
}

/// Frame packets of a recording, in order. Other packet types are skipped.
pub fn read_recorded_frames<R: Read>(source: R) -> Result<Vec<SensorFrame>, TelemetryError> {
    let mut frames = Vec::new();
    for packet in RecordingReader::new(source)? {
        if let Payload::Frame(f) = decode_packet(&packet?)?.payload {
            frames.push(f);
        }
    }
    Ok(frames)
}

/// Streaming reader. Yields packets until end of input; a cut record yields
/// `CorruptRecording` once, after every complete packet before it.
pub struct RecordingReader<R: Read> {
    source: R,
    offset: u64,
    packets: usize,
    done: bool,
}

/// Reads as much of `buf` as possible; returns the byte count.
fn read_full<R: Read>(source: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

impl<R: Read> RecordingReader<R> {
    pub fn new(mut source: R) -> Result<Self, TelemetryError> {
        let mut magic = [0u8; 8];
        let n = read_full(&mut source, &mut magic)?;
        if n < magic.len() || magic != RECORDING_MAGIC {
            return Err(TelemetryError::CorruptRecording {
                offset: 0,
                packets_read: 0,
            });
        }
        Ok(Self {
            source,
            offset: RECORDING_MAGIC.len() as u64,
            packets: 0,
            done: false,
        })
    }

    fn corrupt(&mut self) -> TelemetryError {
        self.done = true;
        TelemetryError::CorruptRecording {
            offset: self.offset,
            packets_read: self.packets,
        }
    }

    fn next_packet(&mut self) -> Result<Option<Vec<u8>>, TelemetryError> {
        let mut len = [0u8; 4];
        match read_full(&mut self.source, &mut len)? {
            0 => {
                self.done = true;
                return Ok(None);
            }
            4 => {}
            _ => return Err(self.corrupt()),
        }
        let len = u32::from_le_bytes(len) as usize;
        if len > MAX_RECORD_LEN {
            return Err(self.corrupt());
        }
        let mut packet = vec![0u8; len];
        if read_full(&mut self.source, &mut packet)? < len {
            return Err(self.corrupt());
        }
        self.offset += 4 + len as u64;
        self.packets += 1;
        Ok(Some(packet))
    }
}

impl<R: Read> Iterator for RecordingReader<R> {
    type Item = Result<Vec<u8>, TelemetryError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_packet() {
            Ok(Some(p)) => Some(Ok(p)),
            Ok(None) => None,
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Re-emits a recording with its original inter-packet timing divided by
/// `speed`. `speed == 0` replays as fast as possible. Deadlines are absolute,
/// so sleep overshoot does not accumulate.
pub struct Replay<R: Read> {
    reader: RecordingReader<R>,
    speed: f64,
    origin: Option<(Instant, u64)>,
}

pub fn replay_trial<R: Read>(source: R, speed: f64) -> Result<Replay<R>, TelemetryError> {
    if !(speed >= 0.0) || !speed.is_finite() {
        return Err(TelemetryError::InvalidSpeed(speed));
    }
    Ok(Replay {
        reader: RecordingReader::new(source)?,
        speed,
        origin: None,
    })
}

impl<R: Read> Iterator for Replay<R> {
    type Item = Result<Vec<u8>, TelemetryError>;

    fn next(&mut self) -> Option<Self::Item> {
        let item = self.reader.next()?;
        if let (Ok(packet), true) = (&item, self.speed > 0.0) {
            if let Some(ts) = packet_timestamp_ms(packet) {
                let (start, ts0) = *self.origin.get_or_insert((Instant::now(), ts));
                let offset_ms = ts.saturating_sub(ts0) as f64 / self.speed;
                let deadline = start + Duration::from_secs_f64(offset_ms / 1000.0);
                let now = Instant::now();
                if deadline > now {
                    thread::sleep(deadline - now);
                }
            }
        }
        Some(item)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake_packets(n: u64) -> Vec<Vec<u8>> {
        (0..n)
            .map(|i| {
                let mut p = vec![b'G', b'C', 1, 3, 0, 9, 0];
                p.extend_from_slice(&(i * 10).to_le_bytes());
                p.extend_from_slice(&[1, 0, 0]);
                p
            })
            .collect()
    }

    #[test]
    fn record_then_replay_as_fast_as_possible() {
        let packets = fake_packets(50);
        let mut buf = Vec::new();
        assert_eq!(record_trial(&packets, &mut buf).unwrap(), 50);
        assert_eq!(&buf[..8], b"GCREC001");
        let replayed: Vec<Vec<u8>> = replay_trial(&buf[..], 0.0).unwrap().collect::<Result<_, _>>().unwrap();
        assert_eq!(replayed, packets);
    }

    #[test]
    fn truncation_reports_cut_point() {
        let packets = fake_packets(5);
        let mut buf = Vec::new();
        record_trial(&packets, &mut buf).unwrap();
        let record = 4 + packets[0].len();
        let cut = 8 + 3 * record + 6;
        let items: Vec<_> = RecordingReader::new(&buf[..cut]).unwrap().collect();
        assert_eq!(items.len(), 4);
        for (item, expected) in items[..3].iter().zip(&packets) {
            assert_eq!(item.as_ref().unwrap(), expected);
        }
        assert_eq!(
            items[3].as_ref().unwrap_err(),
            &TelemetryError::CorruptRecording {
                offset: (8 + 3 * record) as u64,
                packets_read: 3
            }
        );
    }

    #[test]
    fn frame_trial_round_trip() {
        let (frames, _) = crate::sim::synthesize_trial(&crate::sim::SimProfile::default(), 2).unwrap();
        let mut buf = Vec::new();
        assert_eq!(record_frames(&frames, &mut buf).unwrap(), frames.len());
        assert_eq!(read_recorded_frames(&buf[..]).unwrap(), frames);
    }

    #[test]
    fn bad_magic_is_corrupt() {
        assert!(matches!(
            RecordingReader::new(&b"GCREC002"[..]),
            Err(TelemetryError::CorruptRecording { .. })
        ));
        assert!(RecordingReader::new(&b"GC"[..]).is_err());
    }

    #[test]
    fn paced_replay_respects_timing() {
        // 20 packets 10 ms apart at double speed: ~95 ms
        let mut buf = Vec::new();
        record_trial(fake_packets(20), &mut buf).unwrap();
        let start = Instant::now();
        assert_eq!(replay_trial(&buf[..], 2.0).unwrap().count(), 20);
        let ms = start.elapsed().as_secs_f64() * 1000.0;
        assert!((90.0..200.0).contains(&ms), "{ms} ms");
        assert!(replay_trial(&buf[..], -1.0).is_err());
    }
}
