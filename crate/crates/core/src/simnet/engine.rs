//! The sampling event loop.
//!
//! Time advances in whole milliseconds. At every sample instant
//! `t = k * sighting_period`:
//!
//! 1. each node (ascending `node_id`) ticks to `t`; while scanning it
//!    samples every BLE-active, present user (ascending device) and feeds
//!    in-range ones to `on_sighting`;
//! 2. pending reports are drained into the registry in the same order;
//! 3. once per simulated second every node's assignments are refreshed
//!    from `config_for_node` (an unchanged list keeps the rotation going);
//! 4. every 100 ms advertising slot in `[t, t + period)` emits the node's
//!    next frame to each in-range, BLE-active user. Deliveries are
//!    recorded once per (node, device, frame) per node duty cycle.
//!
//! Stretches where nobody is BLE-active and no node has anything to
//! advertise produce no output and are skipped.

use std::collections::HashMap;
use std::io;

use super::log::{Delivery, InteractionLog, LogEntry};
use super::mobility::position_at;
use super::radio::{rssi_between, RadioParams};
use super::{NodeSpec, Point, SimError, SimScenario, UserSpec, Wall};
use crate::codec::AdvertisingFrame;
use crate::node::NodeState;
use crate::registry::{Registry, RegistryConfig, DEFAULT_PRESENCE_HORIZON};

const SLOT_MS: u64 = 100;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub records: u64,
    pub deliveries: u64,
    pub users_discovered: usize,
}

/// Runs the scenario and collects the whole log in memory.
pub fn run(scenario: &SimScenario) -> Result<InteractionLog, SimError> {
    let mut entries = Vec::new();
    run_streaming(scenario, |e| {
        entries.push(e);
        Ok(())
    })?;
    Ok(InteractionLog { entries })
}

// Per (node, user) link cache: positions are stationary most of the time.
#[derive(Clone, Copy)]
struct Link {
    at: Point,
    rssi: Option<f64>,
}

fn link_rssi(
    cache: &mut Option<Link>,
    node: Point,
    user: Point,
    walls: &[Wall],
    radio: &RadioParams,
) -> Option<f64> {
    match cache {
        Some(link) if link.at == user => link.rssi,
        _ => {
            let rssi = rssi_between(node, user, walls, radio);
            *cache = Some(Link { at: user, rssi });
            rssi
        }
    }
}

fn internal(e: impl std::fmt::Display) -> SimError {
    SimError::Internal(e.to_string())
}

/// Runs the scenario, handing each log entry to `emit` in log order.
pub fn run_streaming(
    scenario: &SimScenario,
    mut emit: impl FnMut(LogEntry) -> io::Result<()>,
) -> Result<RunSummary, SimError> {
    scenario.validate()?;
    let radio = scenario.radio;
    let walls = scenario.walls.as_slice();
    let period_ms = scenario.sample_period_ms();
    let duration_ms = scenario.duration * 1000.0;
    let slots_per_sample = period_ms.div_ceil(SLOT_MS);

    let mut specs: Vec<&NodeSpec> = scenario.nodes.iter().collect();
    specs.sort_by(|a, b| a.node_id.cmp(&b.node_id));
    let mut users: Vec<&UserSpec> = scenario.users.iter().collect();
    users.sort_by_key(|u| u.device);
    let user_of: HashMap<_, _> = users.iter().enumerate().map(|(i, u)| (u.device, i)).collect();

    let (nn, nu) = (specs.len(), users.len());
    let mut nodes: Vec<NodeState> = specs
        .iter()
        .map(|s| NodeState::new(s.node_id.clone(), s.schedule, s.phase_offset))
        .collect();
    let mut registry = Registry::new(scenario.taxonomy_or_default(), RegistryConfig::default());

    let mut cursors = vec![0usize; nu];
    let mut links: Vec<Option<Link>> = vec![None; nn * nu];
    let mut delivered: Vec<(i64, Vec<AdvertisingFrame>)> = vec![(i64::MIN, Vec::new()); nn * nu];
    let mut last_record_at = vec![f64::NEG_INFINITY; nn];
    let mut last_refresh_sec: Option<u64> = None;

    let mut summary = RunSummary::default();
    let mut active: Vec<(usize, Point)> = Vec::new();
    let mut reach: Vec<usize> = Vec::new();
    let mut batch: Vec<LogEntry> = Vec::new();

    let mut k: u64 = 0;
    loop {
        let t_ms = k * period_ms;
        if t_ms as f64 >= duration_ms {
            break;
        }
        let t = t_ms as f64 / 1000.0;

        active.clear();
        for (ui, u) in users.iter().enumerate() {
            let iv = &u.ble_active_intervals;
            let c = &mut cursors[ui];
            while *c < iv.len() && iv[*c].1 <= t {
                *c += 1;
            }
            if *c < iv.len() && iv[*c].0 <= t {
                if let Some(p) = position_at(&u.waypoints, t) {
                    active.push((ui, p));
                }
            }
        }

        if active.is_empty() && nodes.iter().all(|n| n.assignments().is_empty()) {
            // Nothing observable can happen before the next BLE interval
            // opens; users inside an interval but outside their trace
            // force plain stepping.
            let mut next: Option<f64> = None;
            let mut step = false;
            for (u, &c) in users.iter().zip(&cursors) {
                if let Some(&(start, _)) = u.ble_active_intervals.get(c) {
                    if start > t {
                        next = Some(next.map_or(start, |n: f64| n.min(start)));
                    } else {
                        step = true;
                    }
                }
            }
            match (step, next) {
                (true, _) => k += 1,
                (false, Some(start)) => {
                    let k_next = (start * 1000.0 / period_ms as f64).ceil() as u64;
                    k = k_next.max(k + 1);
                }
                (false, None) => break,
            }
            continue;
        }

        batch.clear();

        for (ni, node) in nodes.iter_mut().enumerate() {
            node.tick(t).map_err(internal)?;
            if !node.phase().is_scanning() {
                continue;
            }
            for &(ui, pos) in &active {
                let device = users[ui].device;
                if node.has_seen(&device) {
                    continue;
                }
                if let Some(rssi) =
                    link_rssi(&mut links[ni * nu + ui], specs[ni].position, pos, walls, &radio)
                {
                    node.on_sighting(device, rssi.round() as i32, t);
                }
            }
        }

        for (ni, node) in nodes.iter_mut().enumerate() {
            for report in node.drain_reports() {
                let first_contact = registry.user(&report.device).is_none();
                registry.ingest(&report).map_err(internal)?;
                if first_contact {
                    summary.users_discovered += 1;
                    if let Some(cat) = &users[user_of[&report.device]].category {
                        registry
                            .assign_category(&report.device, cat)
                            .map_err(internal)?;
                    }
                }
                last_record_at[ni] = t;
                summary.records += 1;
                let record = registry.records().last().expect("just ingested").clone();
                batch.push(LogEntry::Discovery(record));
            }
        }

        let sec = t_ms / 1000;
        if last_refresh_sec != Some(sec) {
            last_refresh_sec = Some(sec);
            for (ni, node) in nodes.iter_mut().enumerate() {
                let list = if last_record_at[ni] >= t - DEFAULT_PRESENCE_HORIZON {
                    registry
                        .config_for_node(node.node_id(), t, DEFAULT_PRESENCE_HORIZON)
                        .map_err(internal)?
                } else {
                    Vec::new()
                };
                if list.as_slice() != node.assignments() {
                    node.apply_assignments(list);
                }
            }
        }

        for (ni, node) in nodes.iter_mut().enumerate() {
            if node.assignments().is_empty() {
                continue;
            }
            reach.clear();
            for &(ui, pos) in &active {
                if link_rssi(&mut links[ni * nu + ui], specs[ni].position, pos, walls, &radio)
                    .is_some()
                {
                    reach.push(ui);
                }
            }
            for s in 0..slots_per_sample {
                let frame = node.next_advertisement().expect("assignments are non-empty");
                if reach.is_empty() {
                    continue;
                }
                let ts = (t_ms + s * SLOT_MS) as f64 / 1000.0;
                let cycle = node.schedule().cycle_index(ts, node.phase_offset());
                for &ui in &reach {
                    let seen = &mut delivered[ni * nu + ui];
                    if seen.0 != cycle {
                        seen.0 = cycle;
                        seen.1.clear();
                    }
                    if seen.1.contains(&frame) {
                        continue;
                    }
                    seen.1.push(frame);
                    summary.deliveries += 1;
                    batch.push(LogEntry::Delivery(Delivery {
                        device: users[ui].device,
                        node: node.node_id().to_owned(),
                        t: ts,
                        frame: frame.to_hex(),
                    }));
                }
            }
        }

        batch.sort_by(|a, b| a.log_order(b));
        for entry in batch.drain(..) {
            emit(entry).map_err(|e| SimError::Internal(format!("writing log: {e}")))?;
        }
        k += 1;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::decode_ibeacon;
    use crate::node::{DeviceAddress, ScanSchedule};
    use crate::simnet::{default_epoch, NodeSpec, SimScenario, UserSpec};

    fn scenario(ble: Vec<(f64, f64)>, duration: f64) -> SimScenario {
        SimScenario {
            seed: 1,
            duration,
            epoch: default_epoch(),
            nodes: vec![NodeSpec {
                node_id: "n01".into(),
                position: Point::new(0.0, 0.0),
                schedule: ScanSchedule::default(),
                phase_offset: 0.0,
            }],
            walls: vec![],
            users: vec![UserSpec {
                device: DeviceAddress::synthetic(1),
                waypoints: vec![(0.0, 1.0, 0.0), (duration, 1.0, 0.0)],
                ble_active_intervals: ble,
                category: None,
            }],
            radio: RadioParams::default(),
            taxonomy: None,
        }
    }

    #[test]
    fn one_user_two_windows() {
        let log = run(&scenario(vec![(0.0, 10.0)], 10.0)).unwrap();
        let times: Vec<f64> = log.discoveries().map(|r| r.t).collect();
        assert_eq!(times, vec![0.0, 6.0]);
        assert!(log.discoveries().all(|r| r.rssi == -59));
        let ids: Vec<u64> = log.discoveries().map(|r| r.record_id).collect();
        assert_eq!(ids, vec![1, 2]);
    }

    #[test]
    fn ble_off_means_empty_log() {
        assert!(run(&scenario(vec![], 10.0)).unwrap().entries.is_empty());
    }

    #[test]
    fn identical_runs_are_byte_identical() {
        let s = scenario(vec![(0.0, 40.0), (100.0, 130.0)], 200.0);
        assert_eq!(run(&s).unwrap().to_jsonl(), run(&s).unwrap().to_jsonl());
    }

    #[test]
    fn deliveries_follow_discovery() {
        let log = run(&scenario(vec![(0.0, 10.0)], 10.0)).unwrap();
        let deliveries: Vec<_> = log.deliveries().collect();
        // assignment appears at the first refresh (t=0) and is delivered once
        // per duty cycle: cycles [0,6) and [6,12)
        assert_eq!(deliveries.len(), 2);
        assert_eq!(deliveries[0].t, 0.0);
        assert_eq!(deliveries[1].t, 6.0);
        let frame = crate::codec::AdvertisingFrame::from_hex(&deliveries[0].frame).unwrap();
        let cfg = decode_ibeacon(frame.as_bytes()).unwrap();
        assert_eq!(cfg, *crate::registry::ProfileTaxonomy::default().default_config());
        // discovery sorts before the delivery at the same instant
        assert!(matches!(log.entries[0], LogEntry::Discovery(_)));
    }

    #[test]
    fn out_of_range_user_is_never_seen() {
        let mut s = scenario(vec![(0.0, 10.0)], 10.0);
        s.users[0].waypoints = vec![(0.0, 100.0, 0.0), (10.0, 100.0, 0.0)];
        assert!(run(&s).unwrap().entries.is_empty());
    }

    #[test]
    fn category_is_applied_on_first_contact() {
        let mut s = scenario(vec![(0.0, 10.0)], 10.0);
        s.users[0].category = Some("staff".into());
        let log = run(&s).unwrap();
        let d = log.deliveries().next().unwrap();
        let cfg = decode_ibeacon(
            crate::codec::AdvertisingFrame::from_hex(&d.frame).unwrap().as_bytes(),
        )
        .unwrap();
        assert_eq!(cfg, *crate::registry::ProfileTaxonomy::default().get("staff").unwrap());
    }

    #[test]
    fn skipping_idle_stretches_matches_late_activation() {
        // the user only switches BLE on late in a long run
        let s = scenario(vec![(86_000.5, 86_013.0)], 86_400.0);
        let log = run(&s).unwrap();
        let times: Vec<f64> = log.discoveries().map(|r| r.t).collect();
        // samples at 86001.. ; windows start at multiples of 6 (86004 = 6*14334)
        assert_eq!(times, vec![86_001.0, 86_004.0, 86_010.0]);
    }
}
