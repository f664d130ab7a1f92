//! Synthetic faculty-building scenarios.
//!
//! Nodes sit at the centres of 30 m square rooms laid out on a grid. Rooms
//! are separated by walls with small doorways near the corners, so a user
//! standing in a room is heard by that room's node only. Users follow one
//! of three archetypes:
//!
//! * **student**: weekday visits roughly 08:15–18:30 local; BLE on for a
//!   late-morning burst and a short afternoon burst on some visits.
//! * **exam-period dropout**: a student who stops coming a few days after
//!   the exam period starts.
//! * **staff-always-on**: a device left in one room with BLE on for
//!   multi-day stretches, nights included.
//!
//! On the exam-start day nearly every student shows up with BLE on for a
//! long morning stretch, which makes it the busiest day of the run.

use std::collections::BTreeSet;

use chrono::{DateTime, Datelike, Duration, FixedOffset, Timelike, Utc, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{default_epoch, NodeSpec, Point, RadioParams, SimError, SimScenario, UserSpec, Wall};
use crate::node::{DeviceAddress, ScanSchedule};

const ROOM: f64 = 30.0;
const DAY: f64 = 86_400.0;
const HOUR: f64 = 3_600.0;
/// Largest offset of a standing spot from its room's node, per axis.
const SPOT_SPREAD: f64 = 6.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FacultyParams {
    pub days: u32,
    pub n_nodes: u32,
    pub n_users: u32,
    pub seed: u64,
    pub epoch: DateTime<Utc>,
    /// Local time offset used to place daily routines, in hours.
    pub tz_offset_hours: i32,
    /// Zero-based day on which the exam period starts.
    pub exam_start_day: u32,
}

impl Default for FacultyParams {
    fn default() -> Self {
        Self {
            days: 27,
            n_nodes: 13,
            n_users: 120,
            seed: 42,
            epoch: default_epoch(),
            tz_offset_hours: 2,
            exam_start_day: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Archetype {
    /// The heaviest user: nights on through the week before the exams and
    /// the first two exam days.
    NightOwl,
    /// Mid-week stretch, Tuesday morning to Wednesday evening.
    MidweekStaff,
    Student,
    Dropout { cutoff_day: u32 },
}

struct Calendar {
    /// Scenario time of local midnight on day 0.
    midnight0: f64,
    first_day: chrono::NaiveDate,
    days: u32,
}

impl Calendar {
    fn new(p: &FacultyParams) -> Self {
        let tz = FixedOffset::east_opt(p.tz_offset_hours * 3600).expect("offset validated");
        let local = p.epoch.with_timezone(&tz);
        Self {
            midnight0: -(local.num_seconds_from_midnight() as f64),
            first_day: local.date_naive(),
            days: p.days,
        }
    }

    /// Scenario time of `hours` past local midnight on `day`.
    fn at(&self, day: u32, hours: f64) -> f64 {
        self.midnight0 + day as f64 * DAY + hours * HOUR
    }

    fn is_weekday(&self, day: u32) -> bool {
        let wd = (self.first_day + Duration::days(day as i64)).weekday();
        !matches!(wd, Weekday::Sat | Weekday::Sun)
    }

    fn weekday(&self, day: u32) -> Weekday {
        (self.first_day + Duration::days(day as i64)).weekday()
    }

    fn weekdays(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.days).filter(|&d| self.is_weekday(d))
    }
}

struct Building {
    node_positions: Vec<Point>,
    walls: Vec<Wall>,
}

fn building(n_nodes: u32) -> Building {
    let n = n_nodes as usize;
    let cols = ((n as f64 * 5.0 / 3.0).sqrt().ceil() as usize).max(1);
    let rows = n.div_ceil(cols);
    let node_positions = (0..n)
        .map(|i| Point::new(((i % cols) as f64 + 0.5) * ROOM, ((i / cols) as f64 + 0.5) * ROOM))
        .collect();

    // Interior walls with a 3 m doorway near one corner of every room side.
    // The long pieces run slightly past the corner so a sight line through
    // the exact corner point still crosses a wall.
    let (w, h) = (cols as f64 * ROOM, rows as f64 * ROOM);
    let mut walls = Vec::new();
    for c in 1..cols {
        let x = c as f64 * ROOM;
        for r in 0..rows {
            let y0 = r as f64 * ROOM;
            walls.push(Wall { x1: x, y1: y0, x2: x, y2: y0 + 2.0 });
            walls.push(Wall { x1: x, y1: y0 + 5.0, x2: x, y2: y0 + ROOM + 0.5 });
        }
    }
    for r in 1..rows {
        let y = r as f64 * ROOM;
        for c in 0..cols {
            let x0 = c as f64 * ROOM;
            walls.push(Wall { x1: x0, y1: y, x2: x0 + 2.0, y2: y });
            walls.push(Wall { x1: x0 + 5.0, y1: y, x2: x0 + ROOM + 0.5, y2: y });
        }
    }
    // outer shell
    walls.push(Wall { x1: 0.0, y1: 0.0, x2: w, y2: 0.0 });
    walls.push(Wall { x1: w, y1: 0.0, x2: w, y2: h });
    walls.push(Wall { x1: w, y1: h, x2: 0.0, y2: h });
    walls.push(Wall { x1: 0.0, y1: h, x2: 0.0, y2: 0.0 });
    Building {
        node_positions,
        walls,
    }
}

fn spot(rng: &mut ChaCha8Rng, nodes: &[Point]) -> Point {
    let base = nodes[rng.gen_range(0..nodes.len())];
    Point::new(
        base.x + rng.gen_range(-SPOT_SPREAD..=SPOT_SPREAD),
        base.y + rng.gen_range(-SPOT_SPREAD..=SPOT_SPREAD),
    )
}

/// Merges overlapping or touching intervals and clips them to `[0, end]`.
fn normalize(mut iv: Vec<(f64, f64)>, end: f64) -> Vec<(f64, f64)> {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (s, e) in iv {
        let (s, e) = (s.max(0.0), e.min(end));
        if s >= e {
            continue;
        }
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

fn round_s(t: f64) -> f64 {
    t.round()
}

struct Visit {
    arrive: f64,
    leave: f64,
    morning: Point,
    afternoon: Point,
    move_at: f64,
    bursts: Vec<(f64, f64)>,
}

fn student_visits(
    rng: &mut ChaCha8Rng,
    cal: &Calendar,
    p: &FacultyParams,
    nodes: &[Point],
    archetype: Archetype,
) -> Vec<Visit> {
    let ble_habit: f64 = rng.gen_range(0.3..0.7);
    let mut visits = Vec::new();
    let mut discovered = false;
    for day in cal.weekdays() {
        let exam_day = day == p.exam_start_day;
        let in_exams = day > p.exam_start_day;
        if let Archetype::Dropout { cutoff_day } = archetype {
            if day >= cutoff_day {
                break;
            }
        }
        let attend_p = if exam_day {
            0.95
        } else if in_exams {
            0.5
        } else {
            0.8
        };
        // Draw everything up front so the random stream does not depend
        // on which branch is taken.
        let attend_roll: f64 = rng.gen();
        let ble_roll: f64 = rng.gen();
        let arrive_h: f64 = rng.gen_range(8.25..9.75);
        let leave_h = rng.gen_range(17.0..18.5);
        let move_h = rng.gen_range(12.5..13.25);
        let morning = spot(rng, nodes);
        let afternoon = spot(rng, nodes);
        let b1_start = rng.gen_range(9.75..11.25);
        let b1_len = rng.gen_range(20.0..45.0) / 60.0;
        let b2_start = rng.gen_range(13.5..16.5);
        let b2_len = rng.gen_range(5.0..15.0) / 60.0;
        let exam_start = rng.gen_range(9.0..10.5);
        let exam_len = rng.gen_range(60.0..90.0) / 60.0;

        // the first visit always has BLE on so every user gets discovered
        let first = !discovered;
        if !(first || attend_roll < attend_p) {
            continue;
        }
        let ble_on = first || if exam_day { ble_roll < 0.9 } else { ble_roll < ble_habit };
        let mut bursts: Vec<(f64, f64)> = Vec::new();
        if ble_on {
            if exam_day {
                bursts.push((exam_start, exam_start + exam_len));
            } else {
                bursts.push((b1_start, b1_start + b1_len));
                bursts.push((b2_start, b2_start + b2_len));
            }
        }
        let arrive_h = arrive_h.min(bursts.first().map_or(arrive_h, |b| b.0 - 0.1));
        discovered = true;
        visits.push(Visit {
            arrive: round_s(cal.at(day, arrive_h)),
            leave: round_s(cal.at(day, leave_h)),
            morning,
            afternoon,
            move_at: round_s(cal.at(day, move_h)),
            bursts: bursts
                .into_iter()
                .map(|(s, e)| (round_s(cal.at(day, s)), round_s(cal.at(day, e))))
                .collect(),
        });
    }
    visits
}

fn visits_to_user(device: DeviceAddress, visits: Vec<Visit>, duration: f64) -> UserSpec {
    let mut waypoints = Vec::new();
    let mut ble = Vec::new();
    for v in visits {
        // morning bursts stay before the move, afternoon ones after it
        for (s, e) in v.bursts {
            let (s, e) = if s < v.move_at {
                (s, e.min(v.move_at))
            } else {
                (s.max(v.move_at + 60.0), e.min(v.leave))
            };
            ble.push((s.max(v.arrive), e));
        }
        for wp in [
            (v.arrive, v.morning),
            (v.move_at, v.morning),
            (v.move_at + 60.0, v.afternoon),
            (v.leave, v.afternoon),
        ] {
            waypoints.push((wp.0, wp.1.x, wp.1.y));
        }
    }
    UserSpec {
        device,
        waypoints,
        ble_active_intervals: normalize(ble, duration),
        category: Some("student".into()),
    }
}

fn staff_user(
    device: DeviceAddress,
    at: Point,
    stretches: Vec<(f64, f64)>,
    duration: f64,
) -> UserSpec {
    let ble = normalize(stretches, duration);
    let waypoints = match (ble.first(), ble.last()) {
        (Some(first), Some(last)) if last.1 > first.0 => {
            vec![(first.0, at.x, at.y), (last.1, at.x, at.y)]
        }
        _ => Vec::new(),
    };
    UserSpec {
        device,
        waypoints,
        ble_active_intervals: ble,
        category: Some("staff".into()),
    }
}

fn night_owl_stretches(cal: &Calendar, p: &FacultyParams) -> Vec<(f64, f64)> {
    let exam = p.exam_start_day;
    let last_day = exam + 4;
    let nights: BTreeSet<u32> = (exam.saturating_sub(7)..exam.saturating_sub(2))
        .chain([exam, exam + 1])
        .collect();
    let mut out: Vec<(f64, f64)> = cal
        .weekdays()
        .filter(|&d| d <= last_day)
        .map(|d| {
            let end = if nights.contains(&d) {
                cal.at(d + 1, 8.0)
            } else {
                cal.at(d, 20.0)
            };
            (cal.at(d, 8.0), end)
        })
        .collect();
    if out.is_empty() {
        // runs too short for a weekday still get one stretch
        out.push((cal.at(0, 8.0), cal.at(0, 20.0)));
    }
    out
}

fn midweek_stretches(cal: &Calendar) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = (0..cal.days)
        .filter(|&d| cal.weekday(d) == Weekday::Tue)
        .map(|d| (cal.at(d, 8.0), cal.at(d + 1, 20.0)))
        .collect();
    if out.is_empty() {
        out.push((cal.at(0, 8.0), cal.at(0, 20.0)));
    }
    out
}

/// Builds a deterministic, shape-faithful scenario for `params`.
pub fn generate_faculty_scenario(params: &FacultyParams) -> Result<SimScenario, SimError> {
    let p = params;
    if p.days == 0 || p.n_nodes == 0 || p.n_users == 0 {
        return Err(SimError::InvalidParams(
            "days, nodes and users must all be at least 1".into(),
        ));
    }
    if p.tz_offset_hours.abs() > 14 {
        return Err(SimError::InvalidParams(format!(
            "tz offset {} is outside ±14 h",
            p.tz_offset_hours
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let cal = Calendar::new(p);
    let duration = p.days as f64 * DAY;
    let b = building(p.n_nodes);

    let mut devices = BTreeSet::new();
    let mut next_device = |rng: &mut ChaCha8Rng| loop {
        let mut o: [u8; 6] = rng.gen();
        // unicast, globally administered, like a phone's public address
        o[0] &= 0xFC;
        let d = DeviceAddress::new(o);
        if devices.insert(d) {
            return d;
        }
    };

    let n = p.n_users;
    let n_staff = ((n as f64 / 60.0).round() as u32).clamp(1, n);
    let n_rest = n - n_staff;
    let n_dropouts = (n_rest as f64 * 0.55).round() as u32;

    let mut users = Vec::with_capacity(n as usize);
    for i in 0..n {
        let device = next_device(&mut rng);
        let archetype = if i == 0 {
            Archetype::NightOwl
        } else if i < n_staff {
            Archetype::MidweekStaff
        } else if i < n_staff + n_dropouts {
            Archetype::Dropout {
                cutoff_day: p.exam_start_day + rng.gen_range(1..=5),
            }
        } else {
            Archetype::Student
        };
        let user = match archetype {
            Archetype::NightOwl => {
                let at = spot(&mut rng, &b.node_positions);
                staff_user(device, at, night_owl_stretches(&cal, p), duration)
            }
            Archetype::MidweekStaff => {
                let at = spot(&mut rng, &b.node_positions);
                staff_user(device, at, midweek_stretches(&cal), duration)
            }
            Archetype::Student | Archetype::Dropout { .. } => {
                let visits = student_visits(&mut rng, &cal, p, &b.node_positions, archetype);
                visits_to_user(device, visits, duration)
            }
        };
        users.push(user);
    }

    let scenario = SimScenario {
        seed: p.seed,
        duration,
        epoch: p.epoch,
        nodes: b
            .node_positions
            .iter()
            .enumerate()
            .map(|(i, &position)| NodeSpec {
                node_id: format!("n{:02}", i + 1),
                position,
                schedule: ScanSchedule::default(),
                phase_offset: 0.0,
            })
            .collect(),
        walls: b.walls,
        users,
        radio: RadioParams::default(),
        taxonomy: None,
    };
    scenario
        .validate()
        .map_err(|e| SimError::Internal(format!("generated scenario failed validation: {e}")))?;
    Ok(scenario)
}
