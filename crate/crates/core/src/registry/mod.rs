//! The central user registry.
//!
//! Ingests discovery reports from nodes, keeps one profile per device with
//! its entrance timestamps, maps each profile to a [`BeaconConfig`] through
//! the [`ProfileTaxonomy`], and answers which configurations a node should
//! be advertising right now.

mod taxonomy;
pub mod server;
pub mod store;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::BeaconConfig;
use crate::node::{DeviceAddress, DiscoveryReport};

pub use taxonomy::{ProfileTaxonomy, DEFAULT_CATEGORY};

pub const DEFAULT_SKEW_ALLOWANCE: f64 = 5.0;
pub const DEFAULT_PRESENCE_HORIZON: f64 = 30.0;
pub const DEFAULT_SESSION_GAP: f64 = 600.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegistryError {
    #[error("stale-report: t={timestamp} is more than {allowance}s before the latest t={latest} for {device}")]
    StaleReport {
        device: DeviceAddress,
        timestamp: f64,
        latest: f64,
        allowance: f64,
    },
    #[error("unknown-user: {0}")]
    UnknownUser(String),
    #[error("unknown-category: {0}")]
    UnknownCategory(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid taxonomy: {0}")]
    InvalidTaxonomy(String),
    #[error("corrupt-snapshot: {0}")]
    CorruptSnapshot(String),
}

impl RegistryError {
    /// Short error code used on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            RegistryError::StaleReport { .. } => "stale-report",
            RegistryError::UnknownUser(_) => "unknown-user",
            RegistryError::UnknownCategory(_) => "unknown-category",
            RegistryError::InvalidArgument(_) => "invalid-argument",
            RegistryError::InvalidTaxonomy(_) => "invalid-taxonomy",
            RegistryError::CorruptSnapshot(_) => "corrupt-snapshot",
        }
    }
}

/// One accepted report. This is also the record-log line format:
/// `{"record_id":1,"node":"n03","device":"aa:bb:cc:dd:ee:01","t":12.0,"rssi":-71}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscoveryRecord {
    pub record_id: u64,
    pub node: String,
    pub device: DeviceAddress,
    pub t: f64,
    pub rssi: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub device: DeviceAddress,
    pub pseudonym: String,
    pub category: String,
    pub assigned_config: BeaconConfig,
    pub first_seen: f64,
    pub timestamps: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistryConfig {
    /// How far a report may lag the user's latest timestamp before it is
    /// rejected as stale.
    pub skew_allowance: f64,
}

impl Default for RegistryConfig {
    fn default() -> Self {
        Self {
            skew_allowance: DEFAULT_SKEW_ALLOWANCE,
        }
    }
}

/// Formats the pseudonym for the `n`-th distinct device (1-based).
pub fn pseudonym_for(n: usize) -> String {
    format!("user-{n:04}")
}

/// Splits timestamps into maximal runs whose consecutive members differ by
/// at most `gap`, returning `(first, last)` per run. Input must be sorted.
pub fn sessionize(sorted: &[f64], gap: f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for &t in sorted {
        match out.last_mut() {
            Some((_, end)) if t - *end <= gap => *end = t,
            _ => out.push((t, t)),
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct Registry {
    config: RegistryConfig,
    taxonomy: ProfileTaxonomy,
    records: Vec<DiscoveryRecord>,
    users: Vec<UserProfile>,
    // max timestamp per user, parallel to `users`
    latest: Vec<f64>,
    user_index: HashMap<DeviceAddress, usize>,
    // Devices in first-contact order; position + 1 is the pseudonym counter.
    pseudonym_order: Vec<DeviceAddress>,
    pseudonyms: HashMap<DeviceAddress, usize>,
    // node -> device -> latest sighting time at that node
    last_seen_at: HashMap<String, HashMap<DeviceAddress, f64>>,
}

impl Default for Registry {
    fn default() -> Self {
        Self::new(ProfileTaxonomy::default(), RegistryConfig::default())
    }
}

impl Registry {
    pub fn new(taxonomy: ProfileTaxonomy, config: RegistryConfig) -> Self {
        Self {
            config,
            taxonomy,
            records: Vec::new(),
            users: Vec::new(),
            latest: Vec::new(),
            user_index: HashMap::new(),
            pseudonym_order: Vec::new(),
            pseudonyms: HashMap::new(),
            last_seen_at: HashMap::new(),
        }
    }

    pub fn config(&self) -> &RegistryConfig {
        &self.config
    }

    pub fn taxonomy(&self) -> &ProfileTaxonomy {
        &self.taxonomy
    }

    pub fn records(&self) -> &[DiscoveryRecord] {
        &self.records
    }

    pub fn record_count(&self) -> usize {
        self.records.len()
    }

    /// Users in creation order.
    pub fn users(&self) -> &[UserProfile] {
        &self.users
    }

    pub fn user(&self, device: &DeviceAddress) -> Option<&UserProfile> {
        self.user_index.get(device).map(|&i| &self.users[i])
    }

    pub fn user_by_pseudonym(&self, pseudonym: &str) -> Option<&UserProfile> {
        self.users.iter().find(|u| u.pseudonym == pseudonym)
    }

    /// Stable username for `device`, allocated in first-contact order.
    pub fn pseudonymize(&mut self, device: DeviceAddress) -> String {
        let n = match self.pseudonyms.get(&device) {
            Some(&n) => n,
            None => {
                self.pseudonym_order.push(device);
                let n = self.pseudonym_order.len();
                self.pseudonyms.insert(device, n);
                n
            }
        };
        pseudonym_for(n)
    }

    pub fn ingest(&mut self, report: &DiscoveryReport) -> Result<u64, RegistryError> {
        if !report.timestamp.is_finite() {
            return Err(RegistryError::InvalidArgument(format!(
                "non-finite timestamp {}",
                report.timestamp
            )));
        }
        if let Some(&idx) = self.user_index.get(&report.device) {
            let latest = self.latest[idx];
            if report.timestamp < latest - self.config.skew_allowance {
                return Err(RegistryError::StaleReport {
                    device: report.device,
                    timestamp: report.timestamp,
                    latest,
                    allowance: self.config.skew_allowance,
                });
            }
        }
        let record_id = self.records.last().map_or(1, |r| r.record_id + 1);
        self.append_record(DiscoveryRecord {
            record_id,
            node: report.node_id.clone(),
            device: report.device,
            t: report.timestamp,
            rssi: report.rssi,
        });
        Ok(record_id)
    }

    fn append_record(&mut self, record: DiscoveryRecord) {
        let idx = match self.user_index.get(&record.device) {
            Some(&i) => i,
            None => {
                let pseudonym = self.pseudonymize(record.device);
                let category = self.taxonomy.default_category().to_owned();
                self.users.push(UserProfile {
                    device: record.device,
                    pseudonym,
                    assigned_config: *self.taxonomy.default_config(),
                    category,
                    first_seen: record.t,
                    timestamps: Vec::new(),
                });
                self.latest.push(record.t);
                self.user_index.insert(record.device, self.users.len() - 1);
                self.users.len() - 1
            }
        };
        self.users[idx].timestamps.push(record.t);
        self.latest[idx] = self.latest[idx].max(record.t);
        let per_node = self.last_seen_at.entry(record.node.clone()).or_default();
        let latest = per_node.entry(record.device).or_insert(record.t);
        if record.t > *latest {
            *latest = record.t;
        }
        self.records.push(record);
    }

    pub fn assign_category(
        &mut self,
        device: &DeviceAddress,
        category: &str,
    ) -> Result<&UserProfile, RegistryError> {
        let config = *self
            .taxonomy
            .get(category)
            .ok_or_else(|| RegistryError::UnknownCategory(category.to_owned()))?;
        let idx = *self
            .user_index
            .get(device)
            .ok_or_else(|| RegistryError::UnknownUser(device.to_string()))?;
        let user = &mut self.users[idx];
        user.category = category.to_owned();
        user.assigned_config = config;
        Ok(user)
    }

    /// Configurations `node_id` should advertise at `now`: one entry per
    /// user whose latest record at that node is no older than `horizon`,
    /// most recent first, ties broken by ascending device address.
    pub fn config_for_node(
        &self,
        node_id: &str,
        now: f64,
        horizon: f64,
    ) -> Result<Vec<(DeviceAddress, BeaconConfig)>, RegistryError> {
        if horizon.is_nan() || horizon <= 0.0 {
            return Err(RegistryError::InvalidArgument(format!(
                "presence horizon must be > 0, got {horizon}"
            )));
        }
        let Some(per_node) = self.last_seen_at.get(node_id) else {
            return Ok(Vec::new());
        };
        let mut present: Vec<(f64, DeviceAddress)> = per_node
            .iter()
            .filter(|(_, &t)| t >= now - horizon)
            .map(|(&d, &t)| (t, d))
            .collect();
        present.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        Ok(present
            .into_iter()
            .map(|(_, d)| (d, self.users[self.user_index[&d]].assigned_config))
            .collect())
    }

    /// Entrance sessions for `device`: maximal runs of its timestamps with
    /// no gap above `gap` seconds.
    pub fn entrance_sessions(
        &self,
        device: &DeviceAddress,
        gap: f64,
    ) -> Result<Vec<(f64, f64)>, RegistryError> {
        if gap.is_nan() || gap <= 0.0 {
            return Err(RegistryError::InvalidArgument(format!(
                "session gap must be > 0, got {gap}"
            )));
        }
        let user = self
            .user(device)
            .ok_or_else(|| RegistryError::UnknownUser(device.to_string()))?;
        let mut ts = user.timestamps.clone();
        // reports may arrive slightly out of order within the skew allowance
        ts.sort_by(f64::total_cmp);
        Ok(sessionize(&ts, gap))
    }

    pub fn snapshot(&self) -> String {
        let snap = Snapshot {
            version: SNAPSHOT_VERSION,
            skew_allowance: self.config.skew_allowance,
            taxonomy: self.taxonomy.to_value(),
            pseudonyms: self.pseudonym_order.clone(),
            categories: self
                .users
                .iter()
                .filter(|u| u.category != self.taxonomy.default_category())
                .map(|u| CategoryEntry {
                    device: u.device,
                    category: u.category.clone(),
                })
                .collect(),
            records: self.records.clone(),
        };
        serde_json::to_string(&snap).expect("snapshot serializes")
    }

    pub fn restore(text: &str) -> Result<Self, RegistryError> {
        let corrupt = |msg: String| RegistryError::CorruptSnapshot(msg);
        let snap: Snapshot = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
        if snap.version != SNAPSHOT_VERSION {
            return Err(corrupt(format!("unsupported version {}", snap.version)));
        }
        let taxonomy = ProfileTaxonomy::from_value(&snap.taxonomy)
            .map_err(|e| corrupt(e.to_string()))?;
        let mut reg = Registry::new(
            taxonomy,
            RegistryConfig {
                skew_allowance: snap.skew_allowance,
            },
        );
        for device in snap.pseudonyms {
            if reg.pseudonyms.contains_key(&device) {
                return Err(corrupt(format!("duplicate pseudonym entry for {device}")));
            }
            reg.pseudonymize(device);
        }
        reg.replay(snap.records).map_err(|e| corrupt(e.to_string()))?;
        for entry in snap.categories {
            reg.assign_category(&entry.device, &entry.category)
                .map_err(|e| corrupt(e.to_string()))?;
        }
        Ok(reg)
    }

    /// Re-applies already-accepted records, e.g. from a record log.
    /// Record ids must continue the existing sequence strictly increasing.
    pub fn replay(
        &mut self,
        records: impl IntoIterator<Item = DiscoveryRecord>,
    ) -> Result<(), RegistryError> {
        for record in records {
            let last = self.records.last().map_or(0, |r| r.record_id);
            if record.record_id <= last {
                return Err(RegistryError::InvalidArgument(format!(
                    "record id {} does not follow {last}",
                    record.record_id
                )));
            }
            if !record.t.is_finite() {
                return Err(RegistryError::InvalidArgument(format!(
                    "record {} has a non-finite timestamp",
                    record.record_id
                )));
            }
            self.append_record(record);
        }
        Ok(())
    }

    /// Replaces the taxonomy. Every user's category must exist in the new
    /// one; assigned configs are refreshed from it.
    pub fn set_taxonomy(&mut self, taxonomy: ProfileTaxonomy) -> Result<(), RegistryError> {
        for u in &self.users {
            if taxonomy.get(&u.category).is_none() {
                return Err(RegistryError::UnknownCategory(u.category.clone()));
            }
        }
        for u in &mut self.users {
            u.assigned_config = *taxonomy.get(&u.category).expect("checked above");
        }
        self.taxonomy = taxonomy;
        Ok(())
    }
}

const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Snapshot {
    version: u32,
    skew_allowance: f64,
    taxonomy: serde_json::Value,
    pseudonyms: Vec<DeviceAddress>,
    categories: Vec<CategoryEntry>,
    records: Vec<DiscoveryRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CategoryEntry {
    device: DeviceAddress,
    category: String,
}
