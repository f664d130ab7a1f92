//! Deterministic discrete-event simulation of a beacon deployment.
//!
//! A [`SimScenario`] places nodes and walls on a 2-D floor plan and gives
//! each user a waypoint trace plus the intervals during which their phone
//! has BLE switched on. [`run`] samples the radio at a fixed period, drives
//! every node's scanner and advertiser, feeds discoveries through an
//! in-process [`Registry`](crate::registry::Registry), and returns the
//! resulting [`InteractionLog`].

mod engine;
pub mod generate;
pub mod log;
pub mod mobility;
pub mod radio;

use std::collections::HashSet;

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::node::{DeviceAddress, ScanSchedule};
use crate::registry::ProfileTaxonomy;

pub use engine::{run, run_streaming, RunSummary};
pub use generate::{generate_faculty_scenario, FacultyParams};
pub use log::{Delivery, InteractionLog, LogEntry, LogError};
pub use mobility::{position_at, Waypoint};
pub use radio::{path_rssi, rssi_between, walls_crossed, RadioParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid-scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid-params: {0}")]
    InvalidParams(String),
    #[error("simulation fault: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl Wall {
    pub fn start(&self) -> Point {
        Point::new(self.x1, self.y1)
    }

    pub fn end(&self) -> Point {
        Point::new(self.x2, self.y2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub node_id: String,
    pub position: Point,
    #[serde(default)]
    pub schedule: ScanSchedule,
    #[serde(default)]
    pub phase_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSpec {
    pub device: DeviceAddress,
    pub waypoints: Vec<Waypoint>,
    /// Half-open `[start, end)` intervals with BLE switched on.
    pub ble_active_intervals: Vec<(f64, f64)>,
    /// Taxonomy category to assign once the user is first discovered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
}

pub fn default_epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2017, 5, 5, 0, 0, 0).unwrap()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub seed: u64,
    pub duration: f64,
    #[serde(default = "default_epoch")]
    pub epoch: DateTime<Utc>,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub walls: Vec<Wall>,
    pub users: Vec<UserSpec>,
    #[serde(default)]
    pub radio: RadioParams,
    /// Falls back to the built-in taxonomy when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taxonomy: Option<ProfileTaxonomy>,
}

impl SimScenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: SimScenario =
            serde_json::from_str(text).map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn taxonomy_or_default(&self) -> ProfileTaxonomy {
        self.taxonomy.clone().unwrap_or_default()
    }

    /// Sampling period in whole milliseconds.
    pub(crate) fn sample_period_ms(&self) -> u64 {
        (self.radio.sighting_period * 1000.0).round() as u64
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidScenario(msg));

        if !(self.duration.is_finite() && self.duration > 0.0) {
            return bad(format!("duration must be > 0, got {}", self.duration));
        }
        if self.nodes.is_empty() {
            return bad("at least one node is required".into());
        }
        let mut ids = HashSet::new();
        for n in &self.nodes {
            if n.node_id.is_empty() {
                return bad("node_id must not be empty".into());
            }
            if !ids.insert(n.node_id.as_str()) {
                return bad(format!("duplicate node_id {:?}", n.node_id));
            }
            if !(n.position.x.is_finite() && n.position.y.is_finite()) {
                return bad(format!("node {:?} has a non-finite position", n.node_id));
            }
            if let Err(e) = n.schedule.validate() {
                return bad(format!("node {:?}: {e}", n.node_id));
            }
            if !n.phase_offset.is_finite() {
                return bad(format!("node {:?} has a non-finite phase_offset", n.node_id));
            }
        }
        for (i, w) in self.walls.iter().enumerate() {
            if ![w.x1, w.y1, w.x2, w.y2].iter().all(|v| v.is_finite()) {
                return bad(format!("wall {i} has non-finite coordinates"));
            }
        }

        let r = &self.radio;
        for (name, v) in [
            ("path_loss_exponent", r.path_loss_exponent),
            ("wall_attenuation_db", r.wall_attenuation_db),
            ("rx_threshold_dbm", r.rx_threshold_dbm),
            ("tx_power_dbm", r.tx_power_dbm),
        ] {
            if !v.is_finite() {
                return bad(format!("radio.{name} must be finite"));
            }
        }
        if r.path_loss_exponent <= 0.0 || r.wall_attenuation_db < 0.0 {
            return bad("radio.path_loss_exponent must be > 0 and wall_attenuation_db >= 0".into());
        }
        let period_ms = r.sighting_period * 1000.0;
        if !(r.sighting_period.is_finite() && period_ms >= 1.0)
            || (period_ms - period_ms.round()).abs() > 1e-6
        {
            return bad(format!(
                "radio.sighting_period must be a positive whole number of milliseconds, got {}",
                r.sighting_period
            ));
        }

        let taxonomy = self.taxonomy_or_default();
        let mut devices = HashSet::new();
        for u in &self.users {
            if !devices.insert(u.device) {
                return bad(format!("duplicate device {}", u.device));
            }
            for w in &u.waypoints {
                if !(w.0.is_finite() && w.1.is_finite() && w.2.is_finite()) {
                    return bad(format!("user {}: non-finite waypoint", u.device));
                }
            }
            if u.waypoints.windows(2).any(|p| p[1].0 <= p[0].0) {
                return bad(format!(
                    "user {}: waypoint times must be strictly increasing",
                    u.device
                ));
            }
            for (i, &(s, e)) in u.ble_active_intervals.iter().enumerate() {
                if !(s.is_finite() && e.is_finite() && s < e) {
                    return bad(format!("user {}: BLE interval {i} must have start < end", u.device));
                }
                if s < 0.0 || e > self.duration {
                    return bad(format!(
                        "user {}: BLE interval {i} lies outside [0, {}]",
                        u.device, self.duration
                    ));
                }
            }
            if u.ble_active_intervals.windows(2).any(|p| p[1].0 < p[0].1) {
                return bad(format!(
                    "user {}: BLE intervals must be sorted and non-overlapping",
                    u.device
                ));
            }
            if let Some(cat) = &u.category {
                if taxonomy.get(cat).is_none() {
                    return bad(format!("user {}: unknown category {cat:?}", u.device));
                }
            }
        }
        Ok(())
    }
}
