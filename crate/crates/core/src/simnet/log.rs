//! Interaction logs: JSON lines holding discovery records (the registry's
//! record-log format) interleaved with advertisement deliveries.
//!
//! ```text
//! {"record_id":1,"node":"n01","device":"02:00:00:00:00:07","t":12.0,"rssi":-77}
//! {"device":"02:00:00:00:00:07","node":"n01","t":12.3,"frame":"0201061aff4c0002…"}
//! ```

use std::cmp::Ordering;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::node::DeviceAddress;
use crate::registry::DiscoveryRecord;

/// One advertising slot whose frame reached a BLE-active user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Delivery {
    pub device: DeviceAddress,
    pub node: String,
    pub t: f64,
    pub frame: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LogEntry {
    Discovery(DiscoveryRecord),
    Delivery(Delivery),
}

impl LogEntry {
    pub fn t(&self) -> f64 {
        match self {
            LogEntry::Discovery(r) => r.t,
            LogEntry::Delivery(d) => d.t,
        }
    }

    pub fn node(&self) -> &str {
        match self {
            LogEntry::Discovery(r) => &r.node,
            LogEntry::Delivery(d) => &d.node,
        }
    }

    pub fn device(&self) -> DeviceAddress {
        match self {
            LogEntry::Discovery(r) => r.device,
            LogEntry::Delivery(d) => d.device,
        }
    }

    fn kind_rank(&self) -> u8 {
        match self {
            LogEntry::Discovery(_) => 0,
            LogEntry::Delivery(_) => 1,
        }
    }

    /// Log order: time, then node id, then device, discoveries first.
    pub fn log_order(&self, other: &Self) -> Ordering {
        self.t()
            .total_cmp(&other.t())
            .then_with(|| self.node().cmp(other.node()))
            .then_with(|| self.device().cmp(&other.device()))
            .then_with(|| self.kind_rank().cmp(&other.kind_rank()))
    }

    pub fn to_json_line(&self) -> String {
        match self {
            LogEntry::Discovery(r) => serde_json::to_string(r),
            LogEntry::Delivery(d) => serde_json::to_string(d),
        }
        .expect("log entries serialize")
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("malformed-log: line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

// Superset of both line shapes; classified after parsing.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLine {
    record_id: Option<u64>,
    node: String,
    device: DeviceAddress,
    t: f64,
    rssi: Option<i32>,
    frame: Option<String>,
}

/// Parses one log line. `line_no` is only used in error messages.
pub fn parse_line(text: &str, line_no: usize) -> Result<LogEntry, LogError> {
    let bad = |message: String| LogError::Malformed {
        line: line_no,
        message,
    };
    let raw: RawLine = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    if !raw.t.is_finite() || raw.t < 0.0 {
        return Err(bad(format!("bad timestamp {}", raw.t)));
    }
    match (raw.record_id, raw.rssi, raw.frame) {
        (Some(record_id), Some(rssi), None) => Ok(LogEntry::Discovery(DiscoveryRecord {
            record_id,
            node: raw.node,
            device: raw.device,
            t: raw.t,
            rssi,
        })),
        (None, None, Some(frame)) => Ok(LogEntry::Delivery(Delivery {
            device: raw.device,
            node: raw.node,
            t: raw.t,
            frame,
        })),
        _ => Err(bad(
            "expected a discovery record (record_id, rssi) or a delivery (frame)".into(),
        )),
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct InteractionLog {
    pub entries: Vec<LogEntry>,
}

impl InteractionLog {
    pub fn discoveries(&self) -> impl Iterator<Item = &DiscoveryRecord> {
        self.entries.iter().filter_map(|e| match e {
            LogEntry::Discovery(r) => Some(r),
            LogEntry::Delivery(_) => None,
        })
    }

    pub fn deliveries(&self) -> impl Iterator<Item = &Delivery> {
        self.entries.iter().filter_map(|e| match e {
            LogEntry::Delivery(d) => Some(d),
            LogEntry::Discovery(_) => None,
        })
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        for entry in &self.entries {
            out.write_all(entry.to_json_line().as_bytes())?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    /// Reads a log, skipping blank lines. Errors carry 1-based line numbers.
    pub fn read_from<R: BufRead>(reader: R) -> Result<Self, LogError> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            entries.push(parse_line(&line, i + 1)?);
        }
        Ok(Self { entries })
    }

    pub fn parse(text: &str) -> Result<Self, LogError> {
        Self::read_from(text.as_bytes())
    }
}
