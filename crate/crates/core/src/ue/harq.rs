//! HARQ retransmission model.

use rand::Rng;

use crate::config::HarqConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarqOutcome {
    Ack,
    Nack,
}

/// `(1 - (1 - bler)^n_tx) * r^n_tx`, with `n_tx = 1` for the first
/// transmission.
pub fn nack_probability(bler: f64, r: f64, n_tx: u32) -> f64 {
    let n = n_tx as i32;
    ((1.0 - (1.0 - bler).powi(n)) * r.powi(n)).clamp(0.0, 1.0)
}

pub fn harq_outcome<R: Rng + ?Sized>(n_tx: u32, bler: f64, r: f64, rng: &mut R) -> HarqOutcome {
    debug_assert!(n_tx >= 1);
    let p = nack_probability(bler, r, n_tx);
    if rng.random::<f64>() < p {
        HarqOutcome::Nack
    } else {
        HarqOutcome::Ack
    }
}

/// Time at which an acknowledged block may be handed up.
///
/// Air time plus processing plus one HARQ round trip per retransmission,
/// counted from the first transmission, and never earlier than air time
/// plus processing after the transmission that succeeded.
pub fn release_deadline(n_tx: u32, first_tx_ms: f64, last_tx_ms: f64, slot_ms: f64, harq: &HarqConfig) -> f64 {
    let retx = f64::from(n_tx.saturating_sub(1)) * f64::from(harq.harq_rtt_slots) * slot_ms;
    let from_first = first_tx_ms + slot_ms + harq.processing_delay_ms + retx;
    let from_last = last_tx_ms + slot_ms + harq.processing_delay_ms;
    from_first.max(from_last)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use crate::types::UeId;

    fn harq(proc_ms: f64) -> HarqConfig {
        HarqConfig {
            processing_delay_ms: proc_ms,
            ..HarqConfig::default()
        }
    }

    #[test]
    fn nack_probability_hand_values() {
        assert_eq!(nack_probability(0.0, 0.5, 1), 0.0);
        assert!((nack_probability(0.1, 0.5, 1) - 0.05).abs() < 1e-15);
        assert!((nack_probability(0.1, 0.5, 2) - 0.0475).abs() < 1e-15);
        assert_eq!(nack_probability(1.0, 1.0, 3), 1.0);
    }

    #[test]
    fn zero_bler_always_acks() {
        let mut rng = stream_rng(1, UeId(0), Stream::HarqDl);
        assert!((0..10_000).all(|_| harq_outcome(1, 0.0, 1.0, &mut rng) == HarqOutcome::Ack));
        assert!((0..1000).all(|_| harq_outcome(2, 1.0, 1.0, &mut rng) == HarqOutcome::Nack));
    }

    #[test]
    fn deadline_examples() {
        let h = harq(3.0);
        assert_eq!(release_deadline(1, 10.0, 10.0, 0.5, &h), 13.5);
        assert_eq!(release_deadline(2, 10.0, 14.0, 0.5, &h), 17.5);
        assert_eq!(release_deadline(1, 10.0, 10.0, 1.0, &harq(0.0)), 11.0);
        // a late retransmission pushes the deadline out
        assert_eq!(release_deadline(2, 10.0, 20.0, 0.5, &h), 23.5);
    }
}
