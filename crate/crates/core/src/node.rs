//! Beacon node: a duty-cycled scanning radio plus a round-robin advertiser.
//!
//! Nodes own no clock. The driver supplies instants (seconds since the
//! scenario epoch) and the node derives its phase from them. Scan windows
//! start at `phase_offset + k * period` for every integer `k`, where
//! `period = scan_duration + idle_duration`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::codec::{encode_ibeacon, AdvertisingFrame, BeaconConfig};

/// Interval between advertising slots, in seconds (10 Hz).
pub const ADVERTISING_SLOT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NodeError {
    #[error("clock-regression: tick at {now} after {last}")]
    ClockRegression { last: f64, now: f64 },
    #[error("invalid scan schedule: {0}")]
    InvalidSchedule(String),
    #[error("malformed device address: {0:?}")]
    MalformedAddress(String),
}

/// A 48-bit device address, written as `aa:bb:cc:dd:ee:ff`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct DeviceAddress(pub [u8; 6]);

impl DeviceAddress {
    pub const fn new(octets: [u8; 6]) -> Self {
        Self(octets)
    }

    /// Address whose low 32 bits hold `n`, under a fixed locally
    /// administered prefix. Handy for synthetic populations.
    pub fn synthetic(n: u32) -> Self {
        let b = n.to_be_bytes();
        Self([0x02, 0x00, b[0], b[1], b[2], b[3]])
    }
}

impl fmt::Display for DeviceAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = &self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            o[0], o[1], o[2], o[3], o[4], o[5]
        )
    }
}

impl fmt::Debug for DeviceAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DeviceAddress({self})")
    }
}

impl FromStr for DeviceAddress {
    type Err = NodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || NodeError::MalformedAddress(s.to_owned());
        let mut out = [0u8; 6];
        let mut parts = s.split(':');
        for slot in out.iter_mut() {
            let part = parts.next().ok_or_else(bad)?;
            if part.len() != 2 || !part.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(bad());
            }
            *slot = u8::from_str_radix(part, 16).map_err(|_| bad())?;
        }
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(Self(out))
    }
}

impl Serialize for DeviceAddress {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DeviceAddress {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSchedule {
    #[serde(default = "default_scan")]
    pub scan_duration: f64,
    #[serde(default = "default_idle")]
    pub idle_duration: f64,
}

fn default_scan() -> f64 {
    5.0
}

fn default_idle() -> f64 {
    1.0
}

impl Default for ScanSchedule {
    fn default() -> Self {
        Self {
            scan_duration: default_scan(),
            idle_duration: default_idle(),
        }
    }
}

impl ScanSchedule {
    pub fn new(scan_duration: f64, idle_duration: f64) -> Result<Self, NodeError> {
        let s = Self {
            scan_duration,
            idle_duration,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), NodeError> {
        if !(self.scan_duration.is_finite() && self.scan_duration > 0.0) {
            return Err(NodeError::InvalidSchedule(format!(
                "scan_duration must be > 0, got {}",
                self.scan_duration
            )));
        }
        if !(self.idle_duration.is_finite() && self.idle_duration >= 0.0) {
            return Err(NodeError::InvalidSchedule(format!(
                "idle_duration must be >= 0, got {}",
                self.idle_duration
            )));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        self.scan_duration + self.idle_duration
    }

    /// Index of the duty cycle containing `now`, for windows anchored at
    /// `offset`.
    pub fn cycle_index(&self, now: f64, offset: f64) -> i64 {
        ((now - offset) / self.period()).floor() as i64
    }

    /// Phase at `now` for windows anchored at `offset`.
    pub fn phase_at(&self, now: f64, offset: f64) -> Phase {
        let k = self.cycle_index(now, offset);
        let start = offset + k as f64 * self.period();
        let scan_end = start + self.scan_duration;
        if now < scan_end {
            Phase::Scanning {
                window_start: start,
                window_end: scan_end,
            }
        } else {
            Phase::Idle {
                until: start + self.period(),
            }
        }
    }

    /// True when `t` falls inside a scanning window anchored at `offset`.
    pub fn is_scanning(&self, t: f64, offset: f64) -> bool {
        (t - offset).rem_euclid(self.period()) < self.scan_duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phase {
    Scanning { window_start: f64, window_end: f64 },
    Idle { until: f64 },
}

impl Phase {
    pub fn is_scanning(&self) -> bool {
        matches!(self, Phase::Scanning { .. })
    }
}

/// One node's sighting of one device, waiting to be sent to the registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryReport {
    pub node_id: String,
    pub device: DeviceAddress,
    pub timestamp: f64,
    pub rssi: i32,
}

#[derive(Debug, Clone)]
pub struct NodeState {
    node_id: String,
    schedule: ScanSchedule,
    phase_offset: f64,
    phase: Phase,
    last_tick: Option<f64>,
    seen_this_window: HashSet<DeviceAddress>,
    assignments: Vec<(DeviceAddress, BeaconConfig)>,
    rotation_index: usize,
    pending_reports: Vec<DiscoveryReport>,
}

impl NodeState {
    pub fn new(node_id: impl Into<String>, schedule: ScanSchedule, phase_offset: f64) -> Self {
        Self {
            node_id: node_id.into(),
            schedule,
            phase_offset,
            phase: schedule.phase_at(0.0, phase_offset),
            last_tick: None,
            seen_this_window: HashSet::new(),
            assignments: Vec::new(),
            rotation_index: 0,
            pending_reports: Vec::new(),
        }
    }

    pub fn node_id(&self) -> &str {
        &self.node_id
    }

    pub fn schedule(&self) -> &ScanSchedule {
        &self.schedule
    }

    pub fn phase_offset(&self) -> f64 {
        self.phase_offset
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn seen_this_window(&self) -> &HashSet<DeviceAddress> {
        &self.seen_this_window
    }

    pub fn assignments(&self) -> &[(DeviceAddress, BeaconConfig)] {
        &self.assignments
    }

    pub fn rotation_index(&self) -> usize {
        self.rotation_index
    }

    pub fn pending_reports(&self) -> &[DiscoveryReport] {
        &self.pending_reports
    }

    /// Advances the phase machine to `now`.
    pub fn tick(&mut self, now: f64) -> Result<(), NodeError> {
        if let Some(last) = self.last_tick {
            if now < last {
                return Err(NodeError::ClockRegression { last, now });
            }
        }
        let phase = self.schedule.phase_at(now, self.phase_offset);
        if let Phase::Scanning { window_start, .. } = phase {
            let same_window = matches!(
                self.phase,
                Phase::Scanning { window_start: prev, .. } if prev == window_start
            ) && self.last_tick.is_some();
            if !same_window {
                self.seen_this_window.clear();
            }
        }
        self.phase = phase;
        self.last_tick = Some(now);
        Ok(())
    }

    /// Records a sighting. Only the first sighting of a device in each scan
    /// window produces a report; sightings while idle are dropped.
    pub fn on_sighting(&mut self, device: DeviceAddress, rssi: i32, now: f64) {
        if !self.phase.is_scanning() || !self.seen_this_window.insert(device) {
            return;
        }
        self.pending_reports.push(DiscoveryReport {
            node_id: self.node_id.clone(),
            device,
            timestamp: now,
            rssi,
        });
    }

    /// Whether `device` has already been reported in the current window.
    pub fn has_seen(&self, device: &DeviceAddress) -> bool {
        self.seen_this_window.contains(device)
    }

    pub fn drain_reports(&mut self) -> Vec<DiscoveryReport> {
        std::mem::take(&mut self.pending_reports)
    }

    pub fn apply_assignments(&mut self, assignments: Vec<(DeviceAddress, BeaconConfig)>) {
        self.assignments = assignments;
        self.rotation_index = 0;
    }

    /// Emits the frame for one advertising slot, rotating round-robin over
    /// the assignments. `None` when there is nothing to advertise.
    pub fn next_advertisement(&mut self) -> Option<AdvertisingFrame> {
        let (_, config) = self.assignments.get(self.rotation_index)?;
        let frame = encode_ibeacon(config);
        self.rotation_index = (self.rotation_index + 1) % self.assignments.len();
        Some(frame)
    }
}
