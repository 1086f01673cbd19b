//! Per-tick frequency x time allocation grid.

use crate::config::{CarrierConfig, Duplex};
use crate::types::{Direction, UeId};

/// OFDM symbols in one slot.
pub const SYMBOLS_PER_SLOT: u8 = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotTag {
    D,
    U,
    /// FDD: every slot belongs to the grid's own direction.
    Both,
}

/// Nominal RBG size for a bandwidth part (38.214 Table 5.1.2.2.1-1,
/// configuration 1).
pub fn rbg_size(prb_count: u32) -> u32 {
    match prb_count {
        0..=36 => 2,
        37..=72 => 4,
        73..=144 => 8,
        _ => 16,
    }
}

/// Symbols usable by `direction` in a slot tagged `tag`.
pub fn tdd_symbols(tag: SlotTag, direction: Direction) -> u8 {
    match (tag, direction) {
        (SlotTag::Both, _) | (SlotTag::D, Direction::Dl) | (SlotTag::U, Direction::Ul) => SYMBOLS_PER_SLOT,
        _ => 0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResourceGrid {
    pub direction: Direction,
    pub numerology: u8,
    pub prb_count: u32,
    pub rbg_size: u32,
    pub rbg_count: u32,
    pub slots_per_tick: u32,
    /// Absolute index of the first slot of this tick.
    pub first_slot: u64,
    tags: Vec<SlotTag>,
    allocation: Vec<Option<UeId>>,
}

impl ResourceGrid {
    pub fn new(
        direction: Direction,
        numerology: u8,
        prb_count: u32,
        grouping: bool,
        duplex: &Duplex,
        tick_index: u64,
    ) -> Self {
        let rbg_size = if grouping { rbg_size(prb_count) } else { 1 };
        let rbg_count = prb_count.div_ceil(rbg_size);
        let slots_per_tick = 1u32 << numerology;
        let first_slot = tick_index * u64::from(slots_per_tick);
        let tags = (0..u64::from(slots_per_tick))
            .map(|s| match duplex {
                Duplex::Fdd => SlotTag::Both,
                Duplex::Tdd { pattern } => {
                    let p = pattern.as_bytes();
                    if p[((first_slot + s) % p.len() as u64) as usize] == b'D' {
                        SlotTag::D
                    } else {
                        SlotTag::U
                    }
                }
            })
            .collect();
        Self {
            direction,
            numerology,
            prb_count,
            rbg_size,
            rbg_count,
            slots_per_tick,
            first_slot,
            tags,
            allocation: vec![None; (slots_per_tick * rbg_count) as usize],
        }
    }

    pub fn slot_tag(&self, slot: u32) -> SlotTag {
        self.tags[slot as usize]
    }

    /// B for a slot of this tick.
    pub fn symbols(&self, slot: u32) -> u8 {
        tdd_symbols(self.slot_tag(slot), self.direction)
    }

    pub fn rbg_first_prb(&self, rbg: u32) -> u32 {
        rbg * self.rbg_size
    }

    /// PRBs in `rbg`; the last group may be short.
    pub fn rbg_prbs(&self, rbg: u32) -> u32 {
        (self.prb_count - self.rbg_first_prb(rbg)).min(self.rbg_size)
    }

    pub fn cell(&self, slot: u32, rbg: u32) -> Option<UeId> {
        self.allocation[(slot * self.rbg_count + rbg) as usize]
    }

    /// Book a cell. Panics if it is already taken.
    pub fn assign(&mut self, slot: u32, rbg: u32, ue: UeId) {
        let c = &mut self.allocation[(slot * self.rbg_count + rbg) as usize];
        assert!(c.is_none(), "cell ({slot}, {rbg}) double-booked");
        *c = Some(ue);
    }

    pub fn allocated_cells(&self) -> impl Iterator<Item = (u32, u32, UeId)> + '_ {
        self.allocation.iter().enumerate().filter_map(|(i, c)| {
            c.map(|ue| (i as u32 / self.rbg_count, i as u32 % self.rbg_count, ue))
        })
    }
}

/// Grid of one direction for tick `tick_index`.
pub fn build_grid(carrier: &CarrierConfig, duplex: &Duplex, direction: Direction, tick_index: u64) -> ResourceGrid {
    ResourceGrid::new(
        direction,
        carrier.numerology,
        carrier.prb_count(direction),
        carrier.rbg_grouping,
        duplex,
        tick_index,
    )
}
