//! Ordered publish/subscribe transport contract and the in-process loopback.

use std::collections::HashMap;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Arc, Mutex};

use super::topic::Topic;
use super::TelemetryError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub topic: Topic,
    pub payload: Vec<u8>,
}

/// Messages published by one publisher on one topic must reach every
/// subscriber in publication order.
pub trait Transport: Send + Sync {
    fn publish(&self, topic: &Topic, payload: &[u8]) -> Result<(), TelemetryError>;
}

/// In-process bus. Cloning shares the same subscriber table.
#[derive(Debug, Clone, Default)]
pub struct LoopbackBus {
    subscribers: Arc<Mutex<HashMap<Topic, Vec<Sender<Message>>>>>,
}

impl LoopbackBus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn subscribe(&self, topic: &Topic) -> Receiver<Message> {
        let (tx, rx) = channel();
        self.subscribers
            .lock()
            .expect("bus lock poisoned")
            .entry(topic.clone())
            .or_default()
            .push(tx);
        rx
    }
}

impl Transport for LoopbackBus {
    fn publish(&self, topic: &Topic, payload: &[u8]) -> Result<(), TelemetryError> {
        let mut table = self.subscribers.lock().expect("bus lock poisoned");
        if let Some(senders) = table.get_mut(topic) {
            let msg = Message {
                topic: topic.clone(),
                payload: payload.to_vec(),
            };
            // drop subscribers whose receiver is gone
            senders.retain(|tx| tx.send(msg.clone()).is_ok());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::topic::{topic_for, Device, Stream};
    use std::thread;

    #[test]
    fn per_topic_order_with_concurrent_publishers() {
        let bus = LoopbackBus::new();
        let frames = topic_for(Device::Orthosis, Stream::Frames);
        let feedback = topic_for(Device::Crutch, Stream::Feedback);
        let rx_frames = bus.subscribe(&frames);
        let rx_feedback = bus.subscribe(&feedback);

        let handles: Vec<_> = [(frames.clone(), 0u8), (feedback.clone(), 1u8)]
            .into_iter()
            .map(|(topic, tag)| {
                let bus = bus.clone();
                thread::spawn(move || {
                    for i in 0..1000u32 {
                        let mut payload = vec![tag];
                        payload.extend_from_slice(&i.to_le_bytes());
                        bus.publish(&topic, &payload).unwrap();
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        drop(bus);
        for (rx, tag) in [(rx_frames, 0u8), (rx_feedback, 1u8)] {
            let seq: Vec<u32> = rx
                .try_iter()
                .map(|m| {
                    assert_eq!(m.payload[0], tag);
                    u32::from_le_bytes(m.payload[1..5].try_into().unwrap())
                })
                .collect();
            assert_eq!(seq, (0..1000).collect::<Vec<_>>());
        }
    }

    #[test]
    fn publish_without_subscribers_is_ok() {
        let bus = LoopbackBus::new();
        let t = topic_for(Device::App, Stream::Status);
        bus.publish(&t, b"x").unwrap();
        let rx = bus.subscribe(&t);
        drop(rx);
        bus.publish(&t, b"y").unwrap();
    }
}
