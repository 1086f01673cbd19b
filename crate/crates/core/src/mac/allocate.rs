//! Cell-by-cell grant allocation.

use crate::config::SchedulerMetric;
use crate::phy::ChannelState;
use crate::types::UeId;

use super::amc::Amc;
use super::grid::ResourceGrid;
use super::metric::{compute_metric, UeMetricView};
use super::tbs::{tbs_bits, TbsParams};

/// Bits granted to one UE in one (slot, RBG) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TbsGrant {
    pub ue_id: UeId,
    pub carrier: u32,
    pub slot: u32,
    pub rbg_index: u32,
    pub mcs_index: u8,
    pub modulation_order: u8,
    pub code_rate: f64,
    pub mimo_layers: u8,
    pub scaling_factor: f64,
    pub overhead: f64,
    pub symbols: u8,
    pub bits: u64,
    /// Per-layer SINR the MCS was chosen on.
    pub sinr_db: f64,
}

/// A UE competing for the grid.
#[derive(Debug, Clone)]
pub struct Candidate<'a> {
    pub view: UeMetricView,
    pub csi: &'a ChannelState,
    pub pending_bits: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct AllocParams<'a> {
    pub metric: SchedulerMetric,
    pub amc: &'a Amc,
    pub scaling_factor: f64,
    pub overhead: f64,
    pub carrier: u32,
    pub now_ms: f64,
}

fn cell_params(grid: &ResourceGrid, p: &AllocParams<'_>, csi: &ChannelState, slot: u32, rbg: u32) -> (TbsParams, u8) {
    let (mcs, qm, r) = p.amc.amc_select(csi, grid.rbg_first_prb(rbg));
    let tp = TbsParams {
        layers: csi.rank_indicator,
        modulation_order: qm,
        scaling_factor: p.scaling_factor,
        code_rate: r,
        symbols: grid.symbols(slot),
        overhead: p.overhead,
        rbs_per_rbg: grid.rbg_prbs(rbg),
    };
    (tp, mcs)
}

/// Fill `grid` in (slot, rbg) order, giving each usable cell to the
/// highest-metric UE that still has pending bits. Ties go to the lowest
/// UE id. `candidates` must be sorted by id; their pending bits are
/// decremented as grants are made.
pub fn allocate(grid: &mut ResourceGrid, candidates: &mut [Candidate<'_>], p: &AllocParams<'_>) -> Vec<TbsGrant> {
    debug_assert!(candidates.windows(2).all(|w| w[0].view.ue_id < w[1].view.ue_id));
    let slot_rate = f64::from(grid.slots_per_tick) * 1000.0;
    let mut grants = Vec::new();
    for slot in 0..grid.slots_per_tick {
        if grid.symbols(slot) == 0 {
            continue;
        }
        for rbg in 0..grid.rbg_count {
            let mut best: Option<(usize, f64, u64)> = None;
            for (i, c) in candidates.iter().enumerate() {
                if c.pending_bits == 0 {
                    continue;
                }
                let (tp, _) = cell_params(grid, p, c.csi, slot, rbg);
                let bits = tbs_bits(&tp);
                let m = compute_metric(p.metric, &c.view, bits as f64 * slot_rate, p.now_ms);
                if best.is_none_or(|(_, bm, _)| m > bm) {
                    best = Some((i, m, bits));
                }
            }
            let Some((i, _, bits)) = best else {
                return grants;
            };
            let c = &mut candidates[i];
            let (tp, mcs) = cell_params(grid, p, c.csi, slot, rbg);
            grid.assign(slot, rbg, c.view.ue_id);
            c.pending_bits = c.pending_bits.saturating_sub(bits);
            grants.push(TbsGrant {
                ue_id: c.view.ue_id,
                carrier: p.carrier,
                slot,
                rbg_index: rbg,
                mcs_index: mcs,
                modulation_order: tp.modulation_order,
                code_rate: tp.code_rate,
                mimo_layers: tp.layers,
                scaling_factor: tp.scaling_factor,
                overhead: tp.overhead,
                symbols: tp.symbols,
                bits,
                sinr_db: c.csi.layer_sinr_for_prb(grid.rbg_first_prb(rbg)),
            });
        }
    }
    grants
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{CsiMode, Duplex};
    use crate::phy::channel::{derive_csi, CsiContext};
    use crate::phy::{LinkBudget, RankTable};
    use crate::types::Direction;
    use proptest::prelude::*;

    fn csi_at(amc: &Amc, rank: &RankTable, sinr: f64) -> ChannelState {
        let budget = LinkBudget {
            tx_power_dbm: 0.0,
            gain_tx_dbi: 0.0,
            gain_rx_dbi: 0.0,
            noise_dbm: 0.0,
            interference_dbm: f64::NEG_INFINITY,
        };
        let ctx = CsiContext {
            amc,
            rank,
            csi_mode: CsiMode::Wideband,
            prb_count: 106,
            max_layers: 1,
        };
        derive_csi(&[sinr], &budget, &ctx, 0.0, 1000.0)
    }

    fn view(id: u32, w: f64) -> UeMetricView {
        UeMetricView {
            ue_id: UeId(id),
            average_throughput_bps: 1e6,
            head_of_line_arrival_ms: Some(0.0),
            priority_weight: w,
        }
    }

    fn params<'a>(amc: &'a Amc, metric: SchedulerMetric) -> AllocParams<'a> {
        AllocParams {
            metric,
            amc,
            scaling_factor: 1.0,
            overhead: 0.14,
            carrier: 0,
            now_ms: 5.0,
        }
    }

    #[test]
    fn single_full_buffer_ue_gets_every_dl_cell() {
        let amc = Amc::bundled(0.1);
        let rank = RankTable::from_amc(&amc);
        let csi = csi_at(&amc, &rank, 20.0);
        let tdd = Duplex::Tdd { pattern: "DDDDU".into() };
        let mut grid = ResourceGrid::new(Direction::Dl, 1, 106, true, &tdd, 1);
        let mut c = [Candidate { view: view(1, 1.0), csi: &csi, pending_bits: u64::MAX }];
        let grants = allocate(&mut grid, &mut c, &params(&amc, SchedulerMetric::Pf));
        // tick 1 at mu=1: slots 2 (D) and 3 (D)
        assert_eq!(grants.len(), 28);
        assert!(grid.allocated_cells().all(|(_, _, u)| u == UeId(1)));
        let mut grid = ResourceGrid::new(Direction::Dl, 1, 106, true, &tdd, 2);
        let grants = allocate(&mut grid, &mut c, &params(&amc, SchedulerMetric::Pf));
        // slots 4 (U) and 5 (D)
        assert_eq!(grants.len(), 14);
        assert!(grants.iter().all(|g| g.slot == 1));
    }

    #[test]
    fn empty_buffers_yield_no_grants() {
        let amc = Amc::bundled(0.1);
        let rank = RankTable::from_amc(&amc);
        let csi = csi_at(&amc, &rank, 20.0);
        let mut grid = ResourceGrid::new(Direction::Dl, 0, 24, true, &Duplex::Fdd, 0);
        let mut c = [Candidate { view: view(1, 1.0), csi: &csi, pending_bits: 0 }];
        assert!(allocate(&mut grid, &mut c, &params(&amc, SchedulerMetric::Mt)).is_empty());
    }

    #[test]
    fn ties_go_to_lowest_id_and_weight_breaks_ties() {
        let amc = Amc::bundled(0.1);
        let rank = RankTable::from_amc(&amc);
        let csi = csi_at(&amc, &rank, 10.0);
        let mut grid = ResourceGrid::new(Direction::Dl, 0, 2, true, &Duplex::Fdd, 0);
        let mut c = [
            Candidate { view: view(1, 1.0), csi: &csi, pending_bits: 1 },
            Candidate { view: view(2, 1.0), csi: &csi, pending_bits: 1 },
        ];
        let g = allocate(&mut grid, &mut c, &params(&amc, SchedulerMetric::Mt));
        assert_eq!(g[0].ue_id, UeId(1));

        let mut grid = ResourceGrid::new(Direction::Dl, 0, 2, true, &Duplex::Fdd, 0);
        let mut c = [
            Candidate { view: view(1, 1.0), csi: &csi, pending_bits: 1 },
            Candidate { view: view(2, 2.0), csi: &csi, pending_bits: 1 },
        ];
        let g = allocate(&mut grid, &mut c, &params(&amc, SchedulerMetric::Mt));
        assert_eq!(g[0].ue_id, UeId(2));
    }

    #[test]
    fn fifo_serves_in_arrival_order() {
        let amc = Amc::bundled(0.1);
        let rank = RankTable::from_amc(&amc);
        let csi = csi_at(&amc, &rank, 30.0);
        // one packet per UE, each fits a single cell
        let arrivals = [4.0, 1.0, 3.0, 2.0];
        let mut c: Vec<Candidate> = arrivals
            .iter()
            .enumerate()
            .map(|(i, &a)| Candidate {
                view: UeMetricView { head_of_line_arrival_ms: Some(a), ..view(i as u32, 1.0) },
                csi: &csi,
                pending_bits: 100,
            })
            .collect();
        let mut grid = ResourceGrid::new(Direction::Dl, 0, 106, false, &Duplex::Fdd, 0);
        let g = allocate(&mut grid, &mut c, &params(&amc, SchedulerMetric::Fifo));
        let order: Vec<u32> = g.iter().map(|g| g.ue_id.0).collect();
        assert_eq!(order, vec![1, 3, 2, 0]);
    }

    proptest! {
        #[test]
        fn metric_scaling_never_changes_allocation(
            sinrs in prop::collection::vec(-5.0f64..40.0, 2..6),
            weights in prop::collection::vec(0.1f64..10.0, 6),
            pending in prop::collection::vec(0u64..40_000, 6),
            scale in 0.01f64..100.0,
            metric in prop::sample::select(vec![SchedulerMetric::Pf, SchedulerMetric::Bet, SchedulerMetric::Mt, SchedulerMetric::Fifo]),
        ) {
            let amc = Amc::bundled(0.1);
            let rank = RankTable::from_amc(&amc);
            let csis: Vec<ChannelState> = sinrs.iter().map(|&s| csi_at(&amc, &rank, s)).collect();
            let run = |k: f64| {
                let mut c: Vec<Candidate> = csis.iter().enumerate().map(|(i, csi)| Candidate {
                    view: UeMetricView { average_throughput_bps: 1e5 * (i as f64 + 1.0), ..view(i as u32, weights[i] * k) },
                    csi,
                    pending_bits: pending[i],
                }).collect();
                let mut grid = ResourceGrid::new(Direction::Dl, 1, 52, true, &Duplex::Fdd, 0);
                let g = allocate(&mut grid, &mut c, &params(&amc, metric));
                (g, c.iter().map(|c| c.pending_bits).collect::<Vec<_>>())
            };
            let (a, pa) = run(1.0);
            let (b, pb) = run(scale);
            prop_assert_eq!(a.iter().map(|g| (g.ue_id, g.slot, g.rbg_index)).collect::<Vec<_>>(),
                            b.iter().map(|g| (g.ue_id, g.slot, g.rbg_index)).collect::<Vec<_>>());
            prop_assert_eq!(pa, pb);
            // granted per UE never exceeds pending plus one cell
            for (i, p) in pending.iter().enumerate().take(csis.len()) {
                let got: u64 = a.iter().filter(|g| g.ue_id == UeId(i as u32)).map(|g| g.bits).collect::<Vec<_>>().iter().sum();
                let max_cell = a.iter().filter(|g| g.ue_id == UeId(i as u32)).map(|g| g.bits).max().unwrap_or(0);
                prop_assert!(got <= p + max_cell);
            }
        }
    }
}
