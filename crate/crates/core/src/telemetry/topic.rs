//! Topic grammar `gait/{device}/{stream}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TelemetryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Device {
    Orthosis,
    Crutch,
    App,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stream {
    Frames,
    Events,
    Feedback,
    Status,
}

impl Device {
    pub const ALL: [Device; 3] = [Device::Orthosis, Device::Crutch, Device::App];

    pub fn as_str(self) -> &'static str {
        match self {
            Device::Orthosis => "orthosis",
            Device::Crutch => "crutch",
            Device::App => "app",
        }
    }
}

impl Stream {
    pub const ALL: [Stream; 4] = [Stream::Frames, Stream::Events, Stream::Feedback, Stream::Status];

    pub fn as_str(self) -> &'static str {
        match self {
            Stream::Frames => "frames",
            Stream::Events => "events",
            Stream::Feedback => "feedback",
            Stream::Status => "status",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Topic(String);

impl Topic {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub fn topic_for(device: Device, stream: Stream) -> Topic {
    Topic(format!("gait/{}/{}", device.as_str(), stream.as_str()))
}

impl FromStr for Topic {
    type Err = TelemetryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('/').collect();
        let bad = || TelemetryError::InvalidTopic(s.to_string());
        let [root, device, stream] = parts.as_slice() else {
            return Err(bad());
        };
        let device = Device::ALL
            .into_iter()
            .find(|d| d.as_str() == *device)
            .ok_or_else(bad)?;
        let stream = Stream::ALL
            .into_iter()
            .find(|st| st.as_str() == *stream)
            .ok_or_else(bad)?;
        if *root != "gait" {
            return Err(bad());
        }
        Ok(topic_for(device, stream))
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}
