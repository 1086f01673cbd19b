//! Scheduling metrics and the throughput average they depend on.

use std::collections::BTreeMap;

use crate::config::SchedulerMetric;
use crate::types::UeId;

/// Lower bound on the averaged throughput, bits/s.
pub const THROUGHPUT_FLOOR_BPS: f64 = 1.0;

/// What a metric needs to know about one UE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeMetricView {
    pub ue_id: UeId,
    pub average_throughput_bps: f64,
    pub head_of_line_arrival_ms: Option<f64>,
    pub priority_weight: f64,
}

/// Priority-weighted metric of one UE for one cell.
pub fn compute_metric(kind: SchedulerMetric, ue: &UeMetricView, rate_bps: f64, now_ms: f64) -> f64 {
    let t = ue.average_throughput_bps.max(THROUGHPUT_FLOOR_BPS);
    let raw = match kind {
        SchedulerMetric::Fifo => ue
            .head_of_line_arrival_ms
            .map_or(0.0, |a| (now_ms - a).max(0.0)),
        SchedulerMetric::Pf => rate_bps / t,
        SchedulerMetric::Bet => 1.0 / t,
        SchedulerMetric::Mt => rate_bps,
    };
    raw * ue.priority_weight
}

/// Exponential moving average of served throughput per UE, one per
/// direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerState {
    pub ema_alpha: f64,
    throughput: BTreeMap<UeId, f64>,
}

impl SchedulerState {
    pub fn new(ema_alpha: f64, ues: impl IntoIterator<Item = UeId>) -> Self {
        Self {
            ema_alpha,
            throughput: ues.into_iter().map(|u| (u, THROUGHPUT_FLOOR_BPS)).collect(),
        }
    }

    pub fn throughput_bps(&self, ue: UeId) -> f64 {
        self.throughput.get(&ue).copied().unwrap_or(THROUGHPUT_FLOOR_BPS)
    }

    /// `T = (1 - a) T + a * bits * 1000`, floored.
    pub fn update(&mut self, ue: UeId, bits_this_tick: u64) {
        let a = self.ema_alpha;
        let t = self.throughput.entry(ue).or_insert(THROUGHPUT_FLOOR_BPS);
        *t = ((1.0 - a) * *t + a * bits_this_tick as f64 * 1000.0).max(THROUGHPUT_FLOOR_BPS);
    }
}
