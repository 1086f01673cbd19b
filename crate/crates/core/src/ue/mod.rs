//! Per-UE upper layer-2 abstraction: IP buffering, segmentation into
//! transport blocks, HARQ and in-order release.

pub mod harq;
pub mod stack;

pub use harq::{harq_outcome, nack_probability, release_deadline, HarqOutcome};
pub use stack::{BlockState, Delivery, DirectionStack, Ledger, TransportBlock, TxOpportunity};
