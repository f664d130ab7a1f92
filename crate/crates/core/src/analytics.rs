//! Usage aggregations over interaction logs.
//!
//! An interaction is one discovery record. Delivery lines are counted
//! separately and never folded into the interaction totals. Every
//! human-facing output names users by pseudonym (`user-0001`, ...) in order
//! of first appearance in the log; raw device addresses never leave this
//! module.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::io::BufRead;

use chrono::{DateTime, Duration, NaiveDate, Utc};
use thiserror::Error;

use crate::node::DeviceAddress;
use crate::registry::{pseudonym_for, sessionize};
use crate::simnet::log::{parse_line, InteractionLog, LogEntry, LogError};

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("unknown-user: {0}")]
    UnknownUser(String),
    #[error("invalid-argument: {0}")]
    InvalidArgument(String),
    #[error("malformed-csv: {0}")]
    MalformedCsv(String),
    #[error(transparent)]
    Log(#[from] LogError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportOptions {
    /// Whole-hour UTC offset of the local calendar.
    pub tz_offset_hours: i32,
    /// Night window `[night_start, night_end)` in local hours.
    pub night_start: u32,
    pub night_end: u32,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            tz_offset_hours: 2,
            night_start: 0,
            night_end: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageReport {
    pub total_interactions: u64,
    pub total_users: u64,
    /// Delivery lines seen; not part of any interaction count.
    pub deliveries: u64,
    pub per_day: BTreeMap<NaiveDate, u64>,
    /// Bin `h` covers `[h:00, h+1:00)` local, summed over all days.
    pub per_hour: [u64; 24],
    pub per_user: BTreeMap<String, u64>,
    /// Earliest date with the highest count; `None` for an empty log.
    pub peak_day: Option<(NaiveDate, u64)>,
    /// Every hour bin attaining the maximum; empty for an empty log.
    pub peak_hours: Vec<u32>,
    pub active_users: BTreeMap<NaiveDate, u64>,
    pub night_active_users: BTreeSet<String>,
}

impl UsageReport {
    pub fn active_users_on(&self, date: NaiveDate) -> u64 {
        self.active_users.get(&date).copied().unwrap_or(0)
    }

    /// Count descending, pseudonym ascending on ties.
    pub fn top_users(&self, k: usize) -> Vec<(String, u64)> {
        let mut v: Vec<(String, u64)> = self.per_user.iter().map(|(u, &c)| (u.clone(), c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v.truncate(k);
        v
    }
}

/// Maps scenario time onto the local calendar.
#[derive(Debug, Clone, Copy)]
struct LocalClock {
    /// Whole local seconds at t = 0.
    base: i64,
    /// Sub-second remainder of the epoch.
    frac: f64,
}

impl LocalClock {
    fn new(epoch: DateTime<Utc>, tz_offset_hours: i32) -> Self {
        let ms = epoch.timestamp_millis();
        Self {
            base: ms.div_euclid(1000) + tz_offset_hours as i64 * 3600,
            frac: ms.rem_euclid(1000) as f64 / 1000.0,
        }
    }

    /// (days since 1970-01-01, hour of day), both local.
    fn split(&self, t: f64) -> (i64, u32) {
        let s = self.base + (self.frac + t).floor() as i64;
        (s.div_euclid(86_400), (s.rem_euclid(86_400) / 3600) as u32)
    }
}

fn date_of(day: i64) -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).unwrap() + Duration::days(day)
}

/// Hands out pseudonyms in order of first appearance.
#[derive(Debug, Default, Clone)]
struct Pseudonyms {
    index: HashMap<DeviceAddress, usize>,
    names: Vec<String>,
}

impl Pseudonyms {
    fn id(&mut self, device: DeviceAddress) -> usize {
        let next = self.names.len();
        *self.index.entry(device).or_insert_with(|| {
            self.names.push(pseudonym_for(next + 1));
            next
        })
    }

    fn from_log(log: &InteractionLog) -> Self {
        let mut p = Self::default();
        for r in log.discoveries() {
            p.id(r.device);
        }
        p
    }

    /// Accepts either a device address or a pseudonym.
    fn resolve(&self, user: &str) -> Option<DeviceAddress> {
        if let Ok(d) = user.parse::<DeviceAddress>() {
            return self.index.contains_key(&d).then_some(d);
        }
        let i = self.names.iter().position(|n| n == user)?;
        self.index.iter().find(|(_, &v)| v == i).map(|(d, _)| *d)
    }
}

/// Incremental report construction; feed entries in any order.
#[derive(Debug, Clone)]
pub struct ReportBuilder {
    clock: LocalClock,
    options: ReportOptions,
    users: Pseudonyms,
    total: u64,
    deliveries: u64,
    per_day: BTreeMap<i64, u64>,
    per_hour: [u64; 24],
    per_user: Vec<u64>,
    active: BTreeMap<i64, BTreeSet<usize>>,
    night: BTreeSet<usize>,
}

impl ReportBuilder {
    pub fn new(epoch: DateTime<Utc>, options: ReportOptions) -> Self {
        Self {
            clock: LocalClock::new(epoch, options.tz_offset_hours),
            options,
            users: Pseudonyms::default(),
            total: 0,
            deliveries: 0,
            per_day: BTreeMap::new(),
            per_hour: [0; 24],
            per_user: Vec::new(),
            active: BTreeMap::new(),
            night: BTreeSet::new(),
        }
    }

    pub fn add(&mut self, entry: &LogEntry) {
        let r = match entry {
            LogEntry::Delivery(_) => {
                self.deliveries += 1;
                return;
            }
            LogEntry::Discovery(r) => r,
        };
        let u = self.users.id(r.device);
        if u == self.per_user.len() {
            self.per_user.push(0);
        }
        let (day, hour) = self.clock.split(r.t);
        self.total += 1;
        *self.per_day.entry(day).or_default() += 1;
        self.per_hour[hour as usize] += 1;
        self.per_user[u] += 1;
        self.active.entry(day).or_default().insert(u);
        if (self.options.night_start..self.options.night_end).contains(&hour) {
            self.night.insert(u);
        }
    }

    pub fn finish(self) -> UsageReport {
        let per_day: BTreeMap<NaiveDate, u64> =
            self.per_day.into_iter().map(|(d, c)| (date_of(d), c)).collect();
        let peak_day = per_day
            .iter()
            .fold(None, |best: Option<(NaiveDate, u64)>, (&d, &c)| match best {
                Some((_, bc)) if bc >= c => best,
                _ => Some((d, c)),
            });
        let max_hour = self.per_hour.iter().copied().max().unwrap_or(0);
        let peak_hours = if self.total == 0 {
            Vec::new()
        } else {
            (0..24).filter(|&h| self.per_hour[h as usize] == max_hour).collect()
        };
        let names = &self.users.names;
        UsageReport {
            total_interactions: self.total,
            total_users: names.len() as u64,
            deliveries: self.deliveries,
            per_day,
            per_hour: self.per_hour,
            per_user: names.iter().cloned().zip(self.per_user).collect(),
            peak_day,
            peak_hours,
            active_users: self
                .active
                .into_iter()
                .map(|(d, s)| (date_of(d), s.len() as u64))
                .collect(),
            night_active_users: self.night.into_iter().map(|u| names[u].clone()).collect(),
        }
    }
}

pub fn build_report(log: &InteractionLog, epoch: DateTime<Utc>, options: ReportOptions) -> UsageReport {
    let mut b = ReportBuilder::new(epoch, options);
    for e in &log.entries {
        b.add(e);
    }
    b.finish()
}

/// Builds a report straight from log text without holding the log in
/// memory. Blank lines are skipped; errors carry 1-based line numbers.
pub fn report_from_reader<R: BufRead>(
    reader: R,
    epoch: DateTime<Utc>,
    options: ReportOptions,
) -> Result<UsageReport, LogError> {
    let mut b = ReportBuilder::new(epoch, options);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        b.add(&parse_line(&line, i + 1)?);
    }
    Ok(b.finish())
}

fn user_times(log: &InteractionLog, user: &str) -> Result<Vec<f64>, AnalyticsError> {
    let device = Pseudonyms::from_log(log)
        .resolve(user)
        .ok_or_else(|| AnalyticsError::UnknownUser(user.to_string()))?;
    Ok(log.discoveries().filter(|r| r.device == device).map(|r| r.t).collect())
}

/// Per-bin record counts for one user, zero bins omitted. `user` is a
/// device address or a pseudonym.
pub fn user_timeline(
    log: &InteractionLog,
    user: &str,
    bin: f64,
) -> Result<Vec<(f64, u64)>, AnalyticsError> {
    if !(bin.is_finite() && bin > 0.0) {
        return Err(AnalyticsError::InvalidArgument(format!("bin must be > 0, got {bin}")));
    }
    let mut bins: BTreeMap<i64, u64> = BTreeMap::new();
    for t in user_times(log, user)? {
        *bins.entry((t / bin).floor() as i64).or_default() += 1;
    }
    Ok(bins.into_iter().map(|(k, c)| (k as f64 * bin, c)).collect())
}

/// Entrance sessions for one user: maximal runs of sightings with gaps of
/// at most `gap` seconds.
pub fn user_sessions(
    log: &InteractionLog,
    user: &str,
    gap: f64,
) -> Result<Vec<(f64, f64)>, AnalyticsError> {
    if !(gap.is_finite() && gap >= 0.0) {
        return Err(AnalyticsError::InvalidArgument(format!("gap must be >= 0, got {gap}")));
    }
    let mut times = user_times(log, user)?;
    times.sort_by(f64::total_cmp);
    Ok(sessionize(&times, gap))
}

pub fn top_users(log: &InteractionLog, k: usize) -> Result<Vec<(String, u64)>, AnalyticsError> {
    if k == 0 {
        return Err(AnalyticsError::InvalidArgument("k must be >= 1".into()));
    }
    let mut users = Pseudonyms::default();
    let mut counts: Vec<u64> = Vec::new();
    for r in log.discoveries() {
        let u = users.id(r.device);
        if u == counts.len() {
            counts.push(0);
        }
        counts[u] += 1;
    }
    let mut v: Vec<(String, u64)> = users.names.into_iter().zip(counts).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.truncate(k);
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvExport {
    pub per_day: String,
    pub per_hour: String,
    pub per_user: String,
}

fn write_csv<K: ToString>(header: &str, rows: impl IntoIterator<Item = (K, u64)>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([header, "count"]).expect("in-memory write");
    for (k, c) in rows {
        w.write_record([k.to_string(), c.to_string()]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

pub fn export_csv(report: &UsageReport) -> CsvExport {
    CsvExport {
        per_day: write_csv("date", report.per_day.iter().map(|(d, &c)| (d.format("%Y-%m-%d"), c))),
        per_hour: write_csv("hour", report.per_hour.iter().enumerate().map(|(h, &c)| (h, c))),
        per_user: write_csv("user", report.per_user.iter().map(|(u, &c)| (u, c))),
    }
}

/// Reads a two-column `key,count` document with the given key header.
pub fn read_counts_csv(text: &str, key_header: &str) -> Result<Vec<(String, u64)>, AnalyticsError> {
    let bad = |m: String| AnalyticsError::MalformedCsv(m);
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| bad(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != [key_header, "count"] {
        return Err(bad(format!("expected header {key_header},count")));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let count = rec[1]
            .parse()
            .map_err(|_| bad(format!("bad count {:?}", &rec[1])))?;
        out.push((rec[0].to_string(), count));
    }
    Ok(out)
}

/// Aggregates recovered from an export.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportedCounts {
    pub per_day: BTreeMap<NaiveDate, u64>,
    pub per_hour: [u64; 24],
    pub per_user: BTreeMap<String, u64>,
}

pub fn import_csv(export: &CsvExport) -> Result<ImportedCounts, AnalyticsError> {
    let bad = |m: String| AnalyticsError::MalformedCsv(m);
    let mut per_day = BTreeMap::new();
    for (d, c) in read_counts_csv(&export.per_day, "date")? {
        let d = NaiveDate::parse_from_str(&d, "%Y-%m-%d").map_err(|e| bad(format!("{d}: {e}")))?;
        per_day.insert(d, c);
    }
    let mut per_hour = [0; 24];
    let hours = read_counts_csv(&export.per_hour, "hour")?;
    if hours.len() != 24 {
        return Err(bad(format!("expected 24 hour rows, got {}", hours.len())));
    }
    for (h, c) in hours {
        let h: usize = h.parse().map_err(|_| bad(format!("bad hour {h:?}")))?;
        *per_hour.get_mut(h).ok_or_else(|| bad(format!("hour {h} out of range")))? = c;
    }
    let per_user = read_counts_csv(&export.per_user, "user")?.into_iter().collect();
    Ok(ImportedCounts {
        per_day,
        per_hour,
        per_user,
    })
}

/// Plain-text overview: totals, peak day, peak hours and the top ten users.
pub fn summary_text(report: &UsageReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "total interactions: {}", report.total_interactions);
    let _ = writeln!(s, "total users: {}", report.total_users);
    let _ = writeln!(s, "deliveries: {}", report.deliveries);
    match report.peak_day {
        Some((d, c)) => {
            let _ = writeln!(s, "peak day: {} ({c} interactions)", d.format("%Y-%m-%d"));
        }
        None => s.push_str("peak day: none\n"),
    }
    let hours: Vec<String> = report.peak_hours.iter().map(|h| format!("{h:02}:00")).collect();
    let _ = writeln!(
        s,
        "peak hours: {}",
        if hours.is_empty() { "none".to_string() } else { hours.join(", ") }
    );
    let _ = writeln!(s, "night-active users: {}", report.night_active_users.len());
    s.push_str("top users:\n");
    for (i, (u, c)) in report.top_users(10).iter().enumerate() {
        let _ = writeln!(s, "{:>3}. {u} {c}", i + 1);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::DiscoveryRecord;
    use crate::simnet::default_epoch;
    use chrono::{Datelike, TimeZone, Timelike};
    use proptest::prelude::*;

    fn rec(id: u64, device: u8, t: f64) -> LogEntry {
        LogEntry::Discovery(DiscoveryRecord {
            record_id: id,
            node: "n01".into(),
            device: DeviceAddress::synthetic(device as u32),
            t,
            rssi: -70,
        })
    }

    fn log_of(entries: Vec<LogEntry>) -> InteractionLog {
        InteractionLog { entries }
    }

    fn utc_opts() -> ReportOptions {
        ReportOptions {
            tz_offset_hours: 0,
            ..Default::default()
        }
    }

    fn may(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2017, 5, d).unwrap()
    }

    #[test]
    fn empty_log() {
        let r = build_report(&InteractionLog::default(), default_epoch(), ReportOptions::default());
        assert_eq!(r.total_interactions, 0);
        assert!(r.per_day.is_empty());
        assert_eq!(r.per_hour, [0; 24]);
        assert_eq!(r.peak_day, None);
        assert!(r.peak_hours.is_empty());
        let csv = export_csv(&r);
        assert_eq!(csv.per_day, "date,count\n");
        assert_eq!(csv.per_user, "user,count\n");
        assert_eq!(csv.per_hour.lines().count(), 25);
    }

    #[test]
    fn day_boundaries() {
        let log = log_of(vec![rec(1, 1, 0.0), rec(2, 1, 86_400.0)]);
        let r = build_report(&log, default_epoch(), utc_opts());
        assert_eq!(r.per_day, BTreeMap::from([(may(5), 1), (may(6), 1)]));
        assert_eq!(r.total_interactions, 2);

        // at +2 both land two hours later on the same local dates
        let r = build_report(&log, default_epoch(), ReportOptions::default());
        assert_eq!(r.per_day, BTreeMap::from([(may(5), 1), (may(6), 1)]));
        assert_eq!(r.per_hour[2], 2);
        // 22:30 UTC is already the next local day
        let r = build_report(&log_of(vec![rec(1, 1, 81_000.0)]), default_epoch(), ReportOptions::default());
        assert_eq!(r.per_day, BTreeMap::from([(may(6), 1)]));
        assert_eq!(r.per_hour[0], 1);
    }

    #[test]
    fn deliveries_are_not_interactions() {
        let del = LogEntry::Delivery(crate::simnet::Delivery {
            device: DeviceAddress::synthetic(1),
            node: "n01".into(),
            t: 0.5,
            frame: "00".into(),
        });
        let r = build_report(&log_of(vec![rec(1, 1, 0.0), del]), default_epoch(), utc_opts());
        assert_eq!(r.total_interactions, 1);
        assert_eq!(r.deliveries, 1);
    }

    #[test]
    fn peak_day_from_constructed_log() {
        // May 14: 5000, May 15: 8884, May 16: 7000
        let mut entries = Vec::new();
        let mut id = 0;
        for (day, n) in [(9u32, 5000u32), (10, 8884), (11, 7000)] {
            for i in 0..n {
                id += 1;
                entries.push(rec(id, (i % 50) as u8, day as f64 * 86_400.0 + 36_000.0 + i as f64));
            }
        }
        let r = build_report(&log_of(entries), default_epoch(), ReportOptions::default());
        assert_eq!(r.peak_day, Some((may(15), 8884)));
        assert_eq!(r.active_users_on(may(15)), 50);
        assert_eq!(r.active_users_on(may(1)), 0);
    }

    #[test]
    fn timeline_sums_to_the_users_total() {
        let mut entries = Vec::new();
        for i in 0..20_476u64 {
            entries.push(rec(i + 1, 7, i as f64 * 37.0));
        }
        entries.push(rec(20_477, 8, 5.0));
        let log = log_of(entries);
        let tl = user_timeline(&log, "user-0001", 3600.0).unwrap();
        assert_eq!(tl.iter().map(|b| b.1).sum::<u64>(), 20_476);
        assert!(tl.windows(2).all(|w| w[0].0 < w[1].0));
        // by address as well
        let by_addr = user_timeline(&log, &DeviceAddress::synthetic(7).to_string(), 3600.0).unwrap();
        assert_eq!(tl, by_addr);
    }

    #[test]
    fn timeline_basics() {
        let log = log_of(vec![rec(1, 1, 0.0), rec(2, 1, 1.0), rec(3, 1, 2.0)]);
        assert_eq!(user_timeline(&log, "user-0001", 3600.0).unwrap(), vec![(0.0, 3)]);
        assert!(matches!(
            user_timeline(&log, "user-0002", 3600.0),
            Err(AnalyticsError::UnknownUser(_))
        ));
        assert!(matches!(
            user_timeline(&log, "user-0001", 0.0),
            Err(AnalyticsError::InvalidArgument(_))
        ));
    }

    #[test]
    fn top_users_tie_break() {
        let mut entries = Vec::new();
        let mut id = 0;
        // first appearance: device 3 (user-0001), 1 (user-0002), 2 (user-0003)
        for (dev, n) in [(3u8, 1), (1, 5), (2, 5)] {
            for _ in 0..n {
                id += 1;
                entries.push(rec(id, dev, id as f64));
            }
        }
        let log = log_of(entries);
        assert_eq!(
            top_users(&log, 2).unwrap(),
            vec![("user-0002".into(), 5), ("user-0003".into(), 5)]
        );
        assert_eq!(top_users(&log, 10).unwrap().len(), 3);
        assert!(top_users(&log, 0).is_err());
    }

    #[test]
    fn sessions_and_night_flags() {
        let log = log_of(vec![
            rec(1, 1, 0.0),
            rec(2, 1, 600.0),
            rec(3, 1, 1201.0),
            rec(4, 2, 5.0 * 3600.0),
        ]);
        assert_eq!(
            user_sessions(&log, "user-0001", 600.0).unwrap(),
            vec![(0.0, 600.0), (1201.0, 1201.0)]
        );
        let r = build_report(&log, default_epoch(), utc_opts());
        assert_eq!(r.night_active_users, BTreeSet::from(["user-0001".into(), "user-0002".into()]));
        let r = build_report(&log, default_epoch(), ReportOptions::default());
        // 05:00 UTC is 07:00 local
        assert_eq!(r.night_active_users, BTreeSet::from(["user-0001".into()]));
    }

    #[test]
    fn summary_mentions_the_essentials() {
        let log = log_of(vec![rec(1, 1, 36_000.0), rec(2, 2, 36_001.0), rec(3, 2, 36_002.0)]);
        let r = build_report(&log, default_epoch(), utc_opts());
        let s = summary_text(&r);
        assert!(s.contains("total interactions: 3"));
        assert!(s.contains("peak day: 2017-05-05 (3 interactions)"));
        assert!(s.contains("peak hours: 10:00"));
        assert!(s.contains("  1. user-0002 2"));
        assert!(!s.contains("02:00:00"));
    }

    #[test]
    fn streaming_matches_in_memory() {
        let log = log_of((0..500).map(|i| rec(i + 1, (i % 7) as u8, i as f64 * 997.0)).collect());
        let a = build_report(&log, default_epoch(), ReportOptions::default());
        let b = report_from_reader(log.to_jsonl().as_bytes(), default_epoch(), ReportOptions::default())
            .unwrap();
        assert_eq!(a, b);
        let err = report_from_reader("\n{}\n".as_bytes(), default_epoch(), ReportOptions::default())
            .unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn csv_import_rejects_garbage() {
        assert!(read_counts_csv("day,count\n", "date").is_err());
        assert!(read_counts_csv("date,count\n2017-05-05,x\n", "date").is_err());
    }

    // Naive oracle: per-record calendar conversion through chrono, counts by
    // linear scan, ranking by a full sort.
    fn oracle(
        log: &InteractionLog,
        epoch: DateTime<Utc>,
        tz: i32,
    ) -> (BTreeMap<NaiveDate, u64>, [u64; 24], BTreeMap<String, u64>) {
        let offset = chrono::FixedOffset::east_opt(tz * 3600).unwrap();
        let mut seen: Vec<DeviceAddress> = Vec::new();
        let mut per_day = BTreeMap::new();
        let mut per_hour = [0u64; 24];
        let mut per_user = BTreeMap::new();
        for r in log.discoveries() {
            if !seen.contains(&r.device) {
                seen.push(r.device);
            }
            let n = seen.iter().position(|d| *d == r.device).unwrap() + 1;
            let local = (epoch + Duration::milliseconds((r.t * 1000.0) as i64)).with_timezone(&offset);
            *per_day.entry(local.date_naive()).or_insert(0) += 1;
            per_hour[local.hour() as usize] += 1;
            *per_user.entry(format!("user-{n:04}")).or_insert(0) += 1;
        }
        (per_day, per_hour, per_user)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn aggregates_match_naive_recount(
            times in proptest::collection::vec((0u8..20, 0u32..(30 * 86_400)), 0..400),
            tz in -12i32..=14,
            k in 1usize..25,
        ) {
            let log = log_of(times.iter().enumerate()
                .map(|(i, &(d, t))| rec(i as u64 + 1, d, t as f64)).collect());
            let epoch = Utc.with_ymd_and_hms(2017, 5, 5, 0, 0, 0).unwrap();
            let r = build_report(&log, epoch, ReportOptions { tz_offset_hours: tz, ..Default::default() });
            let (per_day, per_hour, per_user) = oracle(&log, epoch, tz);
            prop_assert_eq!(&r.per_day, &per_day);
            prop_assert_eq!(r.per_hour, per_hour);
            prop_assert_eq!(&r.per_user, &per_user);
            let n = times.len() as u64;
            prop_assert_eq!(r.total_interactions, n);
            prop_assert_eq!(r.per_day.values().sum::<u64>(), n);
            prop_assert_eq!(r.per_hour.iter().sum::<u64>(), n);

            let mut ranked: Vec<(String, u64)> = per_user.into_iter().collect();
            ranked.sort_by_key(|(u, c)| (std::cmp::Reverse(*c), u.clone()));
            ranked.truncate(k);
            prop_assert_eq!(top_users(&log, k).unwrap(), ranked);

            let imported = import_csv(&export_csv(&r)).unwrap();
            prop_assert_eq!(imported.per_day, r.per_day.clone());
            prop_assert_eq!(imported.per_hour, r.per_hour);
            prop_assert_eq!(imported.per_user, r.per_user.clone());
            if let Some((d, c)) = r.peak_day {
                prop_assert_eq!(r.per_day.values().max().copied(), Some(c));
                prop_assert_eq!(r.per_day.iter().find(|e| *e.1 == c).map(|e| *e.0), Some(d));
                prop_assert!(d.year() == 2017);
            }
        }
    }
}
