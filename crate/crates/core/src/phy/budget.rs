//! Link budget, received power, static interference and SINR.

use crate::config::{InterfererConfig, ScenarioKind};
use crate::types::Position;

use super::pathloss::{pathloss_db, LinkGeometry};
use super::{db_to_linear, linear_to_db};

/// Constant terms of one link direction. Noise and interference are fixed
/// for the whole run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub gain_tx_dbi: f64,
    pub gain_rx_dbi: f64,
    pub noise_dbm: f64,
    pub interference_dbm: f64,
}

impl LinkBudget {
    /// Received power without shadowing or fading.
    pub fn mean_rsp_dbm(&self, pathloss_db: f64) -> f64 {
        received_power_dbm(self, pathloss_db, 0.0, 0.0)
    }

    pub fn sinr_db(&self, rsp_dbm: f64) -> f64 {
        sinr_db(rsp_dbm, self.noise_dbm, self.interference_dbm)
    }
}

/// `tx + gains - pathloss - shadow + fading`, everything in dB.
pub fn received_power_dbm(budget: &LinkBudget, pathloss_db: f64, shadow_db: f64, fading_db: f64) -> f64 {
    budget.tx_power_dbm + budget.gain_tx_dbi + budget.gain_rx_dbi - pathloss_db - shadow_db + fading_db
}

/// SINR in dB against the power sum of noise and interference.
pub fn sinr_db(rsp_dbm: f64, noise_dbm: f64, interference_dbm: f64) -> f64 {
    rsp_dbm - linear_to_db(db_to_linear(noise_dbm) + db_to_linear(interference_dbm))
}

/// Power sum of every interferer's mean received power at `at`.
/// Returns negative infinity when there are no interferers.
pub fn interference_dbm(
    interferers: &[InterfererConfig],
    at: &Position,
    scenario: ScenarioKind,
    los: bool,
    gain_tx_dbi: f64,
    gain_rx_dbi: f64,
) -> f64 {
    let total_mw: f64 = interferers
        .iter()
        .map(|intf| {
            let geometry = LinkGeometry::between(&intf.position, at);
            let pl = pathloss_db(scenario, &geometry, intf.frequency_hz, los);
            db_to_linear(intf.power_dbm + gain_tx_dbi + gain_rx_dbi - pl)
        })
        .sum();
    linear_to_db(total_mw)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget(tx: f64, gtx: f64, grx: f64) -> LinkBudget {
        LinkBudget {
            tx_power_dbm: tx,
            gain_tx_dbi: gtx,
            gain_rx_dbi: grx,
            noise_dbm: -100.0,
            interference_dbm: f64::NEG_INFINITY,
        }
    }

    #[test]
    fn received_power_sums() {
        assert_eq!(received_power_dbm(&budget(23.0, 0.0, 0.0), 0.0, 0.0, 0.0), 23.0);
        let rsp = received_power_dbm(&budget(23.0, 10.0, 10.0), 82.88, 0.0, 0.0);
        assert!((rsp - (-39.88)).abs() < 1e-9);
    }

    #[test]
    fn sinr_examples() {
        assert!((sinr_db(-90.0, -100.0, f64::NEG_INFINITY) - 10.0).abs() < 1e-12);
        // -90 - 10*log10(2e-10 mW) = -90 + 96.9897
        assert!((sinr_db(-90.0, -100.0, -100.0) - 6.9897).abs() < 1e-4);
        let s = sinr_db(-90.0, -140.0, -60.0);
        assert!((s - (-30.0)).abs() < 1e-3);
    }

    #[test]
    fn interference_power_sum() {
        let at = [200.0, 0.0, 1.5];
        assert_eq!(
            interference_dbm(&[], &at, ScenarioKind::Uma, true, 0.0, 0.0),
            f64::NEG_INFINITY
        );
        let gnb = [0.0, 0.0, 25.0];
        let one = InterfererConfig {
            position: gnb,
            power_dbm: 46.0,
            frequency_hz: 3.5e9,
        };
        let single = interference_dbm(std::slice::from_ref(&one), &at, ScenarioKind::Uma, true, 5.0, 2.0);
        let serving = budget(46.0, 5.0, 2.0);
        let pl = pathloss_db(ScenarioKind::Uma, &LinkGeometry::between(&gnb, &at), 3.5e9, true);
        assert!((single - serving.mean_rsp_dbm(pl)).abs() < 1e-9);

        let double = interference_dbm(&[one.clone(), one], &at, ScenarioKind::Uma, true, 5.0, 2.0);
        assert!((double - single - 3.0103).abs() < 1e-4);
    }
}
