use super::Point;

/// A timed position `(t, x, y)`.
pub type Waypoint = (f64, f64, f64);

/// Position at `t` by linear interpolation between the bracketing
/// waypoints. Outside the trace the user is not in the building.
pub fn position_at(waypoints: &[Waypoint], t: f64) -> Option<Point> {
    let (first, last) = (waypoints.first()?, waypoints.last()?);
    if t < first.0 || t > last.0 {
        return None;
    }
    // index of the first waypoint strictly after t
    let i = waypoints.partition_point(|w| w.0 <= t);
    if i == waypoints.len() {
        return Some(Point { x: last.1, y: last.2 });
    }
    let (t0, x0, y0) = waypoints[i - 1];
    let (t1, x1, y1) = waypoints[i];
    let f = (t - t0) / (t1 - t0);
    Some(Point {
        x: x0 + (x1 - x0) * f,
        y: y0 + (y1 - y0) * f,
    })
}
