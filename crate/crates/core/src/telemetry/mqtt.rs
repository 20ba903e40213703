//! Minimal MQTT 3.1.1 publisher: QoS 0, clean session, no subscriptions.

use std::io::{Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Mutex;
use std::time::Duration;

use super::bus::Transport;
use super::topic::Topic;
use super::TelemetryError;

const CONNECT: u8 = 0x10;
const CONNACK: u8 = 0x20;
const PUBLISH_QOS0: u8 = 0x30;
const DISCONNECT: u8 = 0xE0;

/// Parses `mqtt://host:port` (port defaults to 1883).
pub fn parse_endpoint(endpoint: &str) -> Result<(String, u16), TelemetryError> {
    let bad = || TelemetryError::TransportUnavailable(format!("malformed endpoint `{endpoint}`"));
    let rest = endpoint.strip_prefix("mqtt://").ok_or_else(bad)?;
    let rest = rest.trim_end_matches('/');
    match rest.rsplit_once(':') {
        Some((host, port)) if !host.is_empty() => Ok((host.to_string(), port.parse().map_err(|_| bad())?)),
        None if !rest.is_empty() => Ok((rest.to_string(), 1883)),
        _ => Err(bad()),
    }
}

fn remaining_length(mut n: usize, out: &mut Vec<u8>) {
    loop {
        let mut byte = (n % 128) as u8;
        n /= 128;
        if n > 0 {
            byte |= 0x80;
        }
        out.push(byte);
        if n == 0 {
            break;
        }
    }
}

fn utf8_field(s: &str, out: &mut Vec<u8>) {
    out.extend_from_slice(&(s.len() as u16).to_be_bytes());
    out.extend_from_slice(s.as_bytes());
}

pub fn connect_packet(client_id: &str, keep_alive_s: u16) -> Vec<u8> {
    let mut body = Vec::new();
    utf8_field("MQTT", &mut body);
    body.push(4); // protocol level 3.1.1
    body.push(0x02); // clean session
    body.extend_from_slice(&keep_alive_s.to_be_bytes());
    utf8_field(client_id, &mut body);
    let mut out = vec![CONNECT];
    remaining_length(body.len(), &mut out);
    out.extend_from_slice(&body);
    out
}

pub fn publish_packet(topic: &str, payload: &[u8]) -> Vec<u8> {
    let mut out = vec![PUBLISH_QOS0];
    remaining_length(2 + topic.len() + payload.len(), &mut out);
    utf8_field(topic, &mut out);
    out.extend_from_slice(payload);
    out
}

pub struct MqttPublisher {
    stream: Mutex<TcpStream>,
}

impl MqttPublisher {
    pub fn connect(endpoint: &str, client_id: &str, timeout: Duration) -> Result<Self, TelemetryError> {
        let (host, port) = parse_endpoint(endpoint)?;
        let unavailable = |e: std::io::Error| TelemetryError::TransportUnavailable(format!("{endpoint}: {e}"));
        let addr = (host.as_str(), port)
            .to_socket_addrs()
            .map_err(unavailable)?
            .next()
            .ok_or_else(|| TelemetryError::TransportUnavailable(format!("{endpoint}: no address")))?;
        let mut stream = TcpStream::connect_timeout(&addr, timeout).map_err(unavailable)?;
        stream.set_read_timeout(Some(timeout)).map_err(unavailable)?;
        stream.set_nodelay(true).map_err(unavailable)?;
        stream.write_all(&connect_packet(client_id, 60)).map_err(unavailable)?;
        let mut ack = [0u8; 4];
        stream.read_exact(&mut ack).map_err(unavailable)?;
        if ack[0] != CONNACK || ack[1] != 2 || ack[3] != 0 {
            return Err(TelemetryError::TransportUnavailable(format!(
                "{endpoint}: connection refused (code {})",
                ack[3]
            )));
        }
        Ok(Self {
            stream: Mutex::new(stream),
        })
    }

    pub fn disconnect(self) -> Result<(), TelemetryError> {
        let mut stream = self.stream.into_inner().expect("mqtt lock poisoned");
        stream.write_all(&[DISCONNECT, 0])?;
        Ok(())
    }
}

impl Transport for MqttPublisher {
    fn publish(&self, topic: &Topic, payload: &[u8]) -> Result<(), TelemetryError> {
        let packet = publish_packet(topic.as_str(), payload);
        self.stream
            .lock()
            .expect("mqtt lock poisoned")
            .write_all(&packet)
            .map_err(|e| TelemetryError::TransportUnavailable(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::topic::{topic_for, Device, Stream};
    use std::net::TcpListener;
    use std::thread;

    #[test]
    fn endpoint_parsing() {
        assert_eq!(
            parse_endpoint("mqtt://localhost:1884").unwrap(),
            ("localhost".into(), 1884)
        );
        assert_eq!(parse_endpoint("mqtt://broker").unwrap(), ("broker".into(), 1883));
        assert!(parse_endpoint("tcp://x:1").is_err());
        assert!(parse_endpoint("mqtt://:1").is_err());
    }

    #[test]
    fn remaining_length_encoding() {
        let enc = |n| {
            let mut v = Vec::new();
            remaining_length(n, &mut v);
            v
        };
        assert_eq!(enc(0), vec![0]);
        assert_eq!(enc(127), vec![0x7F]);
        assert_eq!(enc(128), vec![0x80, 0x01]);
        assert_eq!(enc(16_383), vec![0xFF, 0x7F]);
    }

    #[test]
    fn talks_to_a_fake_broker() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let port = listener.local_addr().unwrap().port();
        let broker = thread::spawn(move || {
            let (mut s, _) = listener.accept().unwrap();
            let mut head = [0u8; 2];
            s.read_exact(&mut head).unwrap();
            assert_eq!(head[0], CONNECT);
            let mut body = vec![0u8; head[1] as usize];
            s.read_exact(&mut body).unwrap();
            assert_eq!(&body[2..6], b"MQTT");
            s.write_all(&[CONNACK, 2, 0, 0]).unwrap();
            let mut rest = Vec::new();
            s.read_to_end(&mut rest).unwrap();
            rest
        });
        let publisher =
            MqttPublisher::connect(&format!("mqtt://127.0.0.1:{port}"), "test", Duration::from_secs(2)).unwrap();
        let topic = topic_for(Device::Orthosis, Stream::Frames);
        publisher.publish(&topic, b"abc").unwrap();
        publisher.disconnect().unwrap();
        let received = broker.join().unwrap();
        let mut expected = publish_packet("gait/orthosis/frames", b"abc");
        expected.extend_from_slice(&[DISCONNECT, 0]);
        assert_eq!(received, expected);
    }

    #[test]
    fn unreachable_broker_is_unavailable() {
        let port = {
            let l = TcpListener::bind("127.0.0.1:0").unwrap();
            l.local_addr().unwrap().port()
        };
        assert!(matches!(
            MqttPublisher::connect(&format!("mqtt://127.0.0.1:{port}"), "t", Duration::from_millis(500)),
            Err(TelemetryError::TransportUnavailable(_))
        ));
    }
}
