//! UE movement, advanced once per tick.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{MobilityConfig, MobilityModel};
use crate::types::{distance, Position};

/// Axis directions for the Manhattan model: +x, +y, -x, -y.
const AXES: [[f64; 2]; 4] = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityState {
    pub position: Position,
    pub model: MobilityModel,
    heading_rad: f64,
    axis: usize,
    waypoint: usize,
    since_intersection_m: f64,
}

impl MobilityState {
    pub fn new<R: Rng + ?Sized>(model: MobilityModel, position: Position, rng: &mut R) -> Self {
        let heading_rad = match model {
            MobilityModel::RandomWalk { .. } => rng.random::<f64>() * TAU,
            _ => 0.0,
        };
        let axis = match model {
            MobilityModel::Manhattan { .. } => rng.random_range(0..4),
            _ => 0,
        };
        Self {
            position,
            model,
            heading_rad,
            axis,
            waypoint: 0,
            since_intersection_m: 0.0,
        }
    }

    pub fn speed_mps(&self) -> f64 {
        self.model.speed_mps()
    }

    /// Unit heading in the horizontal plane.
    pub fn heading(&self) -> [f64; 2] {
        match self.model {
            MobilityModel::Manhattan { .. } => AXES[self.axis],
            _ => [self.heading_rad.cos(), self.heading_rad.sin()],
        }
    }

    /// Advance by one step of `dt_s` seconds.
    pub fn step<R: Rng + ?Sized>(&mut self, cfg: &MobilityConfig, dt_s: f64, rng: &mut R) {
        let len = self.speed_mps() * dt_s;
        match self.model.clone() {
            MobilityModel::Static => {}
            MobilityModel::RandomWalk { .. } => {
                let sigma = cfg.random_walk_sigma_deg.to_radians();
                if sigma > 0.0 {
                    let d: f64 = Normal::new(0.0, sigma).expect("finite sigma").sample(rng);
                    self.heading_rad = (self.heading_rad + d).rem_euclid(TAU);
                }
                if len == 0.0 {
                    return;
                }
                let [mut hx, mut hy] = self.heading();
                let nx = self.position[0] + hx * len;
                let ny = self.position[1] + hy * len;
                if nx < cfg.bounds_min[0] || nx > cfg.bounds_max[0] {
                    self.heading_rad = (PI - self.heading_rad).rem_euclid(TAU);
                    hx = -hx;
                }
                if ny < cfg.bounds_min[1] || ny > cfg.bounds_max[1] {
                    self.heading_rad = (-self.heading_rad).rem_euclid(TAU);
                    hy = -hy;
                }
                self.advance([hx, hy], len);
            }
            MobilityModel::Waypoint { targets, .. } => {
                if targets.is_empty() || len == 0.0 {
                    return;
                }
                let mut target = targets[self.waypoint % targets.len()];
                if distance(&self.position, &target) <= cfg.waypoint_tolerance_m {
                    self.waypoint = (self.waypoint + 1) % targets.len();
                    target = targets[self.waypoint];
                }
                let d = distance(&self.position, &target);
                if d == 0.0 {
                    return;
                }
                let t = len.min(d) / d;
                for (p, q) in self.position.iter_mut().zip(target) {
                    *p += (q - *p) * t;
                }
                if len >= d {
                    self.position = target;
                }
            }
            MobilityModel::Manhattan { grid_step_m, .. } => {
                if len == 0.0 {
                    return;
                }
                if self.since_intersection_m >= grid_step_m {
                    self.since_intersection_m -= grid_step_m;
                    let p = cfg.manhattan_turn_probability;
                    let u: f64 = rng.random();
                    if u < p {
                        self.axis = (self.axis + 1) % 4;
                    } else if u < 2.0 * p {
                        self.axis = (self.axis + 3) % 4;
                    }
                }
                let [hx, hy] = AXES[self.axis];
                let nx = self.position[0] + hx * len;
                let ny = self.position[1] + hy * len;
                if nx < cfg.bounds_min[0] || nx > cfg.bounds_max[0] || ny < cfg.bounds_min[1] || ny > cfg.bounds_max[1] {
                    self.axis = (self.axis + 2) % 4;
                }
                self.advance(AXES[self.axis], len);
                self.since_intersection_m += len;
            }
        }
    }

    fn advance(&mut self, h: [f64; 2], len: f64) {
        self.position[0] += h[0] * len;
        self.position[1] += h[1] * len;
    }
}

/// Right-angle check used by tests and callers that log headings.
pub fn is_axis_aligned(v: [f64; 2]) -> bool {
    v[0] == 0.0 || v[1] == 0.0
}
