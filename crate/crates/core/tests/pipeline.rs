//! The simulator's discovery lines are the registry's record log: a store
//! seeded with them rebuilds the same registry the simulator used.

use std::fs;

use beaconcast::analytics::{build_report, ReportOptions};
use beaconcast::registry::store::{Store, RECORD_LOG};
use beaconcast::simnet::{generate_faculty_scenario, run, FacultyParams};

#[test]
fn simulated_log_replays_into_a_store() {
    let scenario = generate_faculty_scenario(&FacultyParams {
        days: 4,
        n_nodes: 5,
        n_users: 15,
        seed: 11,
        ..Default::default()
    })
    .unwrap();
    let log = run(&scenario).unwrap();
    let records: Vec<_> = log.discoveries().cloned().collect();
    assert!(!records.is_empty());

    let dir = tempfile::tempdir().unwrap();
    let lines: String = records
        .iter()
        .map(|r| serde_json::to_string(r).unwrap() + "\n")
        .collect();
    fs::write(dir.path().join(RECORD_LOG), lines).unwrap();

    let (_store, registry) = Store::open(dir.path(), None).unwrap();
    assert_eq!(registry.records(), records.as_slice());

    let report = build_report(&log, scenario.epoch, ReportOptions::default());
    assert_eq!(report.total_interactions, registry.record_count() as u64);
    assert_eq!(report.total_users, registry.users().len() as u64);
    // analytics pseudonyms follow the registry's first-contact order
    for user in registry.users() {
        assert!(report.per_user.contains_key(&user.pseudonym), "{}", user.pseudonym);
        let own = records.iter().filter(|r| r.device == user.device).count() as u64;
        assert_eq!(report.per_user[&user.pseudonym], own);
    }
}
