//! Closed-form large-scale pathloss for UMa, UMi street canyon and InH
//! office, each in LOS and NLOS condition (TR 38.901 Table 7.4.1-1).
//!
//! Distances are in metres, carrier frequency enters in GHz. Breakpoint
//! distances use an effective environment height of 1 m.

use crate::config::ScenarioKind;
use crate::types::{distance, horizontal_distance, Position};

use super::SPEED_OF_LIGHT;

const ENVIRONMENT_HEIGHT_M: f64 = 1.0;
pub const DEFAULT_UE_HEIGHT_M: f64 = 1.5;

/// Geometry of one link. Heights are antenna heights above ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub distance_3d_m: f64,
    pub distance_2d_m: f64,
    pub bs_height_m: f64,
    pub ut_height_m: f64,
}

impl LinkGeometry {
    pub fn between(bs: &Position, ut: &Position) -> Self {
        Self {
            distance_3d_m: distance(bs, ut).max(1.0),
            distance_2d_m: horizontal_distance(bs, ut),
            bs_height_m: bs[2],
            ut_height_m: ut[2],
        }
    }

    /// Geometry at a given 3D distance using the scenario's default heights.
    pub fn from_distance(scenario: ScenarioKind, distance_3d_m: f64) -> Self {
        let bs = scenario.default_bs_height_m();
        let ut = DEFAULT_UE_HEIGHT_M;
        let dh = bs - ut;
        Self {
            distance_3d_m,
            distance_2d_m: (distance_3d_m * distance_3d_m - dh * dh).max(0.0).sqrt(),
            bs_height_m: bs,
            ut_height_m: ut,
        }
    }
}

/// Shadow-fading standard deviation in dB.
pub fn shadow_sigma_db(scenario: ScenarioKind, los: bool) -> f64 {
    match (scenario, los) {
        (ScenarioKind::Uma, true) => 4.0,
        (ScenarioKind::Uma, false) => 6.0,
        (ScenarioKind::Umi, true) => 4.0,
        (ScenarioKind::Umi, false) => 7.82,
        (ScenarioKind::Inh, true) => 3.0,
        (ScenarioKind::Inh, false) => 8.03,
    }
}

/// Shadow-fading decorrelation distance in metres.
pub fn shadow_decorrelation_m(scenario: ScenarioKind, los: bool) -> f64 {
    match (scenario, los) {
        (ScenarioKind::Uma, true) => 37.0,
        (ScenarioKind::Uma, false) => 50.0,
        (ScenarioKind::Umi, true) => 10.0,
        (ScenarioKind::Umi, false) => 13.0,
        (ScenarioKind::Inh, true) => 10.0,
        (ScenarioKind::Inh, false) => 6.0,
    }
}

fn breakpoint_m(g: &LinkGeometry, frequency_hz: f64) -> f64 {
    let hb = (g.bs_height_m - ENVIRONMENT_HEIGHT_M).max(0.1);
    let hu = (g.ut_height_m - ENVIRONMENT_HEIGHT_M).max(0.1);
    4.0 * hb * hu * frequency_hz / SPEED_OF_LIGHT
}

fn los_db(scenario: ScenarioKind, g: &LinkGeometry, fc_ghz: f64, frequency_hz: f64) -> f64 {
    let d3 = g.distance_3d_m;
    let log_f = 20.0 * fc_ghz.log10();
    match scenario {
        ScenarioKind::Uma | ScenarioKind::Umi => {
            let (a, b1, b2) = match scenario {
                ScenarioKind::Uma => (28.0, 22.0, 9.0),
                _ => (32.4, 21.0, 9.5),
            };
            let d_bp = breakpoint_m(g, frequency_hz);
            if g.distance_2d_m <= d_bp {
                a + b1 * d3.log10() + log_f
            } else {
                let dh = g.bs_height_m - g.ut_height_m;
                a + 40.0 * d3.log10() + log_f - b2 * (d_bp * d_bp + dh * dh).log10()
            }
        }
        ScenarioKind::Inh => 32.4 + 17.3 * d3.log10() + log_f,
    }
}

fn nlos_prime_db(scenario: ScenarioKind, g: &LinkGeometry, fc_ghz: f64) -> f64 {
    let d3 = g.distance_3d_m;
    match scenario {
        ScenarioKind::Uma => {
            13.54 + 39.08 * d3.log10() + 20.0 * fc_ghz.log10() - 0.6 * (g.ut_height_m - 1.5)
        }
        ScenarioKind::Umi => {
            35.3 * d3.log10() + 22.4 + 21.3 * fc_ghz.log10() - 0.3 * (g.ut_height_m - 1.5)
        }
        ScenarioKind::Inh => 38.3 * d3.log10() + 17.30 + 24.9 * fc_ghz.log10(),
    }
}

/// Pathloss in dB. NLOS is floored at the LOS value of the same geometry.
pub fn pathloss_db(scenario: ScenarioKind, geometry: &LinkGeometry, frequency_hz: f64, los: bool) -> f64 {
    let fc_ghz = frequency_hz / 1e9;
    let los_pl = los_db(scenario, geometry, fc_ghz, frequency_hz);
    if los {
        los_pl
    } else {
        los_pl.max(nlos_prime_db(scenario, geometry, fc_ghz))
    }
}
