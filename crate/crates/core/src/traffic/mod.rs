//! Packet sources: the synthetic traffic generator and firewall-queue
//! capture.

pub mod capture;
#[cfg(target_os = "linux")]
pub mod nfqueue;
pub mod tg;

use std::fmt;

use crate::types::Direction;

pub use capture::{CaptureError, CaptureHandle, Verdict};
pub use tg::TgState;

/// Per-(UE, direction) packet sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PacketId(pub u64);

impl fmt::Display for PacketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Simulated,
    /// A live packet held by the kernel until a verdict is issued.
    Captured(CaptureHandle),
}

/// One IP packet entering the emulated stack.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketRecord {
    pub id: PacketId,
    pub size_bits: u64,
    pub arrival_time_ms: f64,
    pub direction: Direction,
    pub origin: Origin,
    pub prev_packet_id: Option<PacketId>,
}

impl PacketRecord {
    pub fn captured_handle(&self) -> Option<CaptureHandle> {
        match self.origin {
            Origin::Captured(h) => Some(h),
            Origin::Simulated => None,
        }
    }
}
