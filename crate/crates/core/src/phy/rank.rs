//! Rank indicator lookup.
//!
//! Transmit power is shared equally by the spatial layers, so with `L`
//! layers each one sees `sinr - 10 log10(L)`. Layer `L` is worth enabling
//! once its expected goodput `L * SE(m) * (1 - BLER(m))`, with `m` chosen by
//! AMC on the per-layer SINR, stays above that of `L - 1` layers for every
//! higher SINR. The table stores those SINR thresholds.

use crate::mac::amc::Amc;

pub const MAX_LAYERS: u8 = 4;
const GRID_MIN_DB: f64 = -30.0;
const GRID_MAX_DB: f64 = 120.0;
const GRID_STEP_DB: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    /// `thresholds_db[L - 1]` is the minimum SINR for `L` layers.
    thresholds_db: [f64; MAX_LAYERS as usize],
}

/// Expected goodput per resource element with `layers` layers at `sinr_db`.
pub fn layered_goodput(amc: &Amc, sinr_db: f64, layers: u8) -> f64 {
    let per_layer = sinr_db - 10.0 * f64::from(layers).log10();
    let mcs = amc.select_mcs(per_layer);
    let se = amc.entry(mcs).spectral_efficiency();
    f64::from(layers) * se * (1.0 - amc.bler.bler(mcs, per_layer))
}

impl RankTable {
    pub fn from_amc(amc: &Amc) -> Self {
        let steps = ((GRID_MAX_DB - GRID_MIN_DB) / GRID_STEP_DB).round() as usize;
        let grid: Vec<f64> = (0..=steps).map(|i| GRID_MIN_DB + i as f64 * GRID_STEP_DB).collect();
        let mut thresholds_db = [f64::NEG_INFINITY; MAX_LAYERS as usize];
        for layers in 2..=MAX_LAYERS {
            let last_not_better = grid
                .iter()
                .rposition(|&s| layered_goodput(amc, s, layers) <= layered_goodput(amc, s, layers - 1));
            let threshold = match last_not_better {
                Some(i) if i + 1 < grid.len() => grid[i + 1],
                Some(_) => f64::INFINITY,
                None => GRID_MIN_DB,
            };
            let prev = thresholds_db[usize::from(layers) - 2];
            thresholds_db[usize::from(layers) - 1] = threshold.max(prev);
        }
        Self { thresholds_db }
    }

    pub fn thresholds_db(&self) -> &[f64] {
        &self.thresholds_db
    }

    /// Largest layer count up to `max_layers` whose threshold is met.
    pub fn rank_lookup(&self, sinr_db: f64, max_layers: u8) -> u8 {
        let max_layers = max_layers.clamp(1, MAX_LAYERS);
        (1..=max_layers)
            .rev()
            .find(|&l| self.thresholds_db[usize::from(l) - 1] <= sinr_db)
            .unwrap_or(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> (Amc, RankTable) {
        let amc = Amc::bundled(0.1);
        let t = RankTable::from_amc(&amc);
        (amc, t)
    }

    #[test]
    fn thresholds_non_decreasing_and_finite() {
        let (_, t) = table();
        let th = t.thresholds_db();
        assert_eq!(th[0], f64::NEG_INFINITY);
        for w in th.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!(th[1..].iter().all(|x| x.is_finite()));
    }

    #[test]
    fn above_threshold_more_layers_win_on_sum_rate() {
        let (amc, t) = table();
        for layers in 2..=MAX_LAYERS {
            let th = t.thresholds_db()[usize::from(layers) - 1];
            let mut i = ((th - GRID_MIN_DB) / GRID_STEP_DB).round() as usize;
            loop {
                let s = GRID_MIN_DB + i as f64 * GRID_STEP_DB;
                if s > GRID_MAX_DB {
                    break;
                }
                assert!(layered_goodput(&amc, s, layers) > layered_goodput(&amc, s, layers - 1), "L={layers} s={s}");
                i += 1;
            }
        }
    }

    #[test]
    fn floor_and_clamp() {
        let (_, t) = table();
        assert_eq!(t.rank_lookup(-100.0, 4), 1);
        assert_eq!(t.rank_lookup(f64::NEG_INFINITY, 4), 1);
        assert_eq!(t.rank_lookup(1000.0, 1), 1);
        assert_eq!(t.rank_lookup(1000.0, 4), 4);
        assert_eq!(t.rank_lookup(1000.0, 3), 3);
    }

    #[test]
    fn rank_monotone_in_sinr() {
        let (_, t) = table();
        let mut prev = 1;
        let mut s = -30.0;
        while s < 120.0 {
            let r = t.rank_lookup(s, 4);
            assert!(r >= prev);
            prev = r;
            s += 0.05;
        }
    }
}
