//! Synthetic traffic generator: a constant target rate with Gaussian
//! per-tick variability, cut into fixed-size packets.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::types::Direction;

use super::{Origin, PacketId, PacketRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct TgState {
    pub target_bps: [f64; 2],
    pub packet_size_bits: u64,
    pub jitter_std_fraction: f64,
    accumulator: [f64; 2],
    next_id: [u64; 2],
}

impl TgState {
    pub fn new(dl_bps: f64, ul_bps: f64, packet_size_bits: u64, jitter_std_fraction: f64) -> Self {
        Self {
            target_bps: [dl_bps, ul_bps],
            packet_size_bits,
            jitter_std_fraction,
            accumulator: [0.0; 2],
            next_id: [0; 2],
        }
    }

    pub fn accumulator_bits(&self, dir: Direction) -> f64 {
        self.accumulator[dir.index()]
    }

    /// Packets produced during the 1 ms tick starting at `tick_start_ms`.
    /// A negative jitter draw clamps the increment at zero.
    pub fn generate<R: Rng + ?Sized>(&mut self, dir: Direction, tick_start_ms: f64, rng: &mut R) -> Vec<PacketRecord> {
        let d = dir.index();
        let per_tick = self.target_bps[d] / 1000.0;
        if per_tick <= 0.0 {
            return Vec::new();
        }
        let eps = if self.jitter_std_fraction > 0.0 {
            Normal::new(0.0, self.jitter_std_fraction)
                .expect("finite std")
                .sample(rng)
        } else {
            0.0
        };
        self.accumulator[d] += (per_tick * (1.0 + eps)).max(0.0);
        let size = self.packet_size_bits as f64;
        let n = (self.accumulator[d] / size).floor();
        self.accumulator[d] -= n * size;
        (0..n as u64)
            .map(|_| {
                let id = self.next_id[d];
                self.next_id[d] += 1;
                PacketRecord {
                    id: PacketId(id),
                    size_bits: self.packet_size_bits,
                    arrival_time_ms: tick_start_ms,
                    direction: dir,
                    origin: Origin::Simulated,
                    prev_packet_id: id.checked_sub(1).map(PacketId),
                }
            })
            .collect()
    }
}
