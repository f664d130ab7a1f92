//! Log-distance path loss with a fixed penalty per wall crossed.

use serde::{Deserialize, Serialize};

use super::{Point, Wall};

/// Distances below this are clamped before taking the logarithm.
pub const MIN_DISTANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioParams {
    pub path_loss_exponent: f64,
    pub wall_attenuation_db: f64,
    pub rx_threshold_dbm: f64,
    /// Received power at 1 m.
    pub tx_power_dbm: f64,
    /// Seconds between scan-sample events.
    pub sighting_period: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            path_loss_exponent: 2.0,
            wall_attenuation_db: 5.0,
            rx_threshold_dbm: -90.0,
            tx_power_dbm: -59.0,
            sighting_period: 1.0,
        }
    }
}

/// Received power over `distance` metres through `walls` walls.
pub fn path_rssi(distance: f64, walls: usize, radio: &RadioParams) -> f64 {
    radio.tx_power_dbm
        - 10.0 * radio.path_loss_exponent * distance.max(MIN_DISTANCE).log10()
        - radio.wall_attenuation_db * walls as f64
}

/// RSSI of the link between `tx` and `rx`, or `None` when it falls below
/// the receiver threshold.
pub fn rssi_between(tx: Point, rx: Point, walls: &[Wall], radio: &RadioParams) -> Option<f64> {
    let rssi = path_rssi(tx.distance(rx), walls_crossed(tx, rx, walls), radio);
    (rssi >= radio.rx_threshold_dbm).then_some(rssi)
}

/// Number of walls whose interiors the open segment `a`–`b` crosses.
/// Touching an endpoint or running along a wall does not count.
pub fn walls_crossed(a: Point, b: Point, walls: &[Wall]) -> usize {
    walls
        .iter()
        .filter(|w| segments_cross(a, b, w.start(), w.end()))
        .count()
}

fn orient(p: Point, q: Point, r: Point) -> f64 {
    (q.x - p.x) * (r.y - p.y) - (q.y - p.y) * (r.x - p.x)
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}
