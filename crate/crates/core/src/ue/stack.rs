//! Buffers and bookkeeping of one UE in one direction.
//!
//! Packets enter a drop-tail IP buffer, are cut into transport blocks as
//! grants arrive, go through HARQ and leave strictly in id order once every
//! fragment is acknowledged and its release deadline has passed. A packet
//! with a block that exhausted its retransmissions is dropped as a whole.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;

use crate::config::HarqConfig;
use crate::traffic::{PacketId, PacketRecord};

use super::harq::{harq_outcome, release_deadline, HarqOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockState {
    InFlight,
    NackQueued,
    Acked,
    Dropped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportBlock {
    pub parent_packet_id: PacketId,
    pub fragment_index: u32,
    /// Known once the last fragment of the packet has been cut.
    pub fragment_count: Option<u32>,
    pub size_bits: u64,
    /// Transmissions so far, counting the first.
    pub n_tx: u32,
    pub mcs: u8,
    /// SINR of the original transmission.
    pub sinr_at_tx_db: f64,
    pub first_tx_ms: f64,
    pub last_tx_ms: f64,
    pub release_deadline_ms: f64,
    pub state: BlockState,
    pub retx_ready_ms: f64,
    retx_progress_bits: u64,
}

/// Slice of a grant as seen by one UE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxOpportunity {
    pub tx_ms: f64,
    pub bits: u64,
    pub mcs: u8,
    pub sinr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Fragment {
    size_bits: u64,
    state: BlockState,
    deadline_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct PacketState {
    record: PacketRecord,
    unsent_bits: u64,
    fragments: Vec<Fragment>,
    doomed: bool,
}

impl PacketState {
    fn complete_by(&self, now_ms: f64) -> bool {
        self.unsent_bits == 0
            && self
                .fragments
                .iter()
                .all(|f| f.state == BlockState::Acked && f.deadline_ms <= now_ms)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Delivery {
    Released { record: PacketRecord, latency_ms: f64 },
    Dropped { record: PacketRecord },
}

impl Delivery {
    pub fn record(&self) -> &PacketRecord {
        match self {
            Delivery::Released { record, .. } | Delivery::Dropped { record } => record,
        }
    }
}

/// Bit and packet counters. At every tick
/// `released + dropped + in_flight + queued == ingested`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Ledger {
    pub ingested_bits: u64,
    pub released_bits: u64,
    pub dropped_bits: u64,
    pub in_flight_bits: u64,
    pub queued_bits: u64,
    pub ingested_packets: u64,
    pub released_packets: u64,
    pub dropped_packets: u64,
    /// Ingress drops, a subset of `dropped_packets`.
    pub overflow_packets: u64,
    pub transmissions: u64,
}

impl Ledger {
    pub fn balanced(&self) -> bool {
        self.released_bits + self.dropped_bits + self.in_flight_bits + self.queued_bits == self.ingested_bits
    }
}

#[derive(Debug, Clone)]
pub struct DirectionStack {
    capacity_bits: u64,
    packets: BTreeMap<PacketId, PacketState>,
    ip_queue: VecDeque<PacketId>,
    queued_bits: u64,
    harq_queue: Vec<TransportBlock>,
    counters: Ledger,
    last_admitted: Option<PacketId>,
    last_released: Option<PacketId>,
}

impl DirectionStack {
    pub fn new(capacity_bits: u64) -> Self {
        Self {
            capacity_bits,
            packets: BTreeMap::new(),
            ip_queue: VecDeque::new(),
            queued_bits: 0,
            harq_queue: Vec::new(),
            counters: Ledger::default(),
            last_admitted: None,
            last_released: None,
        }
    }

    /// Put a packet in the IP buffer. A full buffer hands it back; it is
    /// then counted as dropped.
    pub fn admit(&mut self, record: PacketRecord) -> Result<(), PacketRecord> {
        debug_assert!(record.size_bits > 0);
        debug_assert!(self.last_admitted.is_none_or(|l| record.id > l), "ids must increase");
        self.last_admitted = Some(record.id);
        self.counters.ingested_bits += record.size_bits;
        self.counters.ingested_packets += 1;
        if self.queued_bits + record.size_bits > self.capacity_bits {
            self.counters.dropped_bits += record.size_bits;
            self.counters.dropped_packets += 1;
            self.counters.overflow_packets += 1;
            return Err(record);
        }
        self.queued_bits += record.size_bits;
        self.ip_queue.push_back(record.id);
        self.packets.insert(
            record.id,
            PacketState {
                unsent_bits: record.size_bits,
                record,
                fragments: Vec::new(),
                doomed: false,
            },
        );
        Ok(())
    }

    fn ready_blocks(&self, now_ms: f64) -> impl Iterator<Item = &TransportBlock> {
        self.harq_queue.iter().filter(move |b| b.retx_ready_ms <= now_ms)
    }

    /// Unsent IP bits plus retransmissions due by `now_ms`.
    pub fn scheduling_request(&self, now_ms: f64) -> u64 {
        self.queued_bits
            + self
                .ready_blocks(now_ms)
                .map(|b| b.size_bits - b.retx_progress_bits)
                .sum::<u64>()
    }

    /// Arrival time of the oldest packet with something to send.
    pub fn head_of_line_arrival_ms(&self, now_ms: f64) -> Option<f64> {
        let ip = self
            .ip_queue
            .front()
            .map(|id| self.packets[id].record.arrival_time_ms);
        let retx = self
            .ready_blocks(now_ms)
            .filter_map(|b| self.packets.get(&b.parent_packet_id))
            .map(|p| p.record.arrival_time_ms)
            .reduce(f64::min);
        match (ip, retx) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Bits waiting in the IP buffer.
    pub fn buffer_bits(&self) -> u64 {
        self.queued_bits
    }

    /// Fill the given transmission opportunities, in order. Due
    /// retransmissions go first, then new data head-first. Bits beyond
    /// what is pending are discarded. Returns the blocks whose
    /// transmission completed.
    pub fn segment(&mut self, now_ms: f64, opportunities: &[TxOpportunity]) -> Vec<TransportBlock> {
        let mut sent = Vec::new();
        for op in opportunities {
            let mut left = op.bits;
            while left > 0 {
                let Some(i) = self.harq_queue.iter().position(|b| b.retx_ready_ms <= now_ms) else {
                    break;
                };
                let b = &mut self.harq_queue[i];
                let take = (b.size_bits - b.retx_progress_bits).min(left);
                b.retx_progress_bits += take;
                left -= take;
                if b.retx_progress_bits == b.size_bits {
                    let mut b = self.harq_queue.remove(i);
                    b.retx_progress_bits = 0;
                    b.last_tx_ms = op.tx_ms;
                    b.state = BlockState::InFlight;
                    if let Some(p) = self.packets.get_mut(&b.parent_packet_id) {
                        p.fragments[b.fragment_index as usize].state = BlockState::InFlight;
                    }
                    sent.push(b);
                }
            }
            while left > 0 {
                let Some(&id) = self.ip_queue.front() else {
                    break;
                };
                let p = self.packets.get_mut(&id).expect("queued packet tracked");
                let take = p.unsent_bits.min(left);
                p.unsent_bits -= take;
                self.queued_bits -= take;
                left -= take;
                let index = p.fragments.len() as u32;
                p.fragments.push(Fragment {
                    size_bits: take,
                    state: BlockState::InFlight,
                    deadline_ms: f64::INFINITY,
                });
                let last = p.unsent_bits == 0;
                if last {
                    self.ip_queue.pop_front();
                }
                sent.push(TransportBlock {
                    parent_packet_id: id,
                    fragment_index: index,
                    fragment_count: last.then_some(index + 1),
                    size_bits: take,
                    n_tx: 1,
                    mcs: op.mcs,
                    sinr_at_tx_db: op.sinr_db,
                    first_tx_ms: op.tx_ms,
                    last_tx_ms: op.tx_ms,
                    release_deadline_ms: f64::INFINITY,
                    state: BlockState::InFlight,
                    retx_ready_ms: f64::INFINITY,
                    retx_progress_bits: 0,
                });
            }
        }
        sent
    }

    fn doom(&mut self, id: PacketId) {
        let Some(p) = self.packets.get_mut(&id) else {
            return;
        };
        if p.doomed {
            return;
        }
        p.doomed = true;
        for f in &mut p.fragments {
            f.state = BlockState::Dropped;
        }
        if p.unsent_bits > 0 {
            self.queued_bits -= p.unsent_bits;
            p.unsent_bits = 0;
            self.ip_queue.retain(|q| *q != id);
        }
        self.harq_queue.retain(|b| b.parent_packet_id != id);
    }

    /// Draw ACK/NACK for every block sent this tick. Acknowledged blocks
    /// get their release deadline; a NACK on the last allowed transmission
    /// dooms the packet. Returns the blocks to retransmit.
    pub fn evaluate_harq<R: Rng + ?Sized>(
        &mut self,
        blocks: Vec<TransportBlock>,
        bler: impl Fn(u8, f64) -> f64,
        harq: &HarqConfig,
        slot_ms: f64,
        rng: &mut R,
    ) -> Vec<TransportBlock> {
        let mut nacked = Vec::new();
        for mut b in blocks {
            if self.packets.get(&b.parent_packet_id).is_none_or(|p| p.doomed) {
                continue;
            }
            self.counters.transmissions += 1;
            let p_bler = bler(b.mcs, b.sinr_at_tx_db);
            match harq_outcome(b.n_tx, p_bler, harq.error_reduction_factor, rng) {
                HarqOutcome::Ack => {
                    b.state = BlockState::Acked;
                    b.release_deadline_ms = release_deadline(b.n_tx, b.first_tx_ms, b.last_tx_ms, slot_ms, harq);
                    let p = self.packets.get_mut(&b.parent_packet_id).expect("checked");
                    let f = &mut p.fragments[b.fragment_index as usize];
                    f.state = BlockState::Acked;
                    f.deadline_ms = b.release_deadline_ms;
                }
                HarqOutcome::Nack if b.n_tx > harq.max_retransmissions => {
                    self.doom(b.parent_packet_id);
                }
                HarqOutcome::Nack => {
                    b.n_tx += 1;
                    b.state = BlockState::NackQueued;
                    b.retx_ready_ms = b.last_tx_ms + f64::from(harq.harq_rtt_slots) * slot_ms;
                    let p = self.packets.get_mut(&b.parent_packet_id).expect("checked");
                    p.fragments[b.fragment_index as usize].state = BlockState::NackQueued;
                    nacked.push(b);
                }
            }
        }
        nacked
    }

    /// Queue NACKed blocks for retransmission, oldest due first.
    pub fn requeue(&mut self, nacked: Vec<TransportBlock>) {
        for b in nacked {
            if self.packets.get(&b.parent_packet_id).is_some_and(|p| !p.doomed) {
                self.harq_queue.push(b);
            }
        }
        self.harq_queue.sort_by(|a, b| {
            a.retx_ready_ms
                .total_cmp(&b.retx_ready_ms)
                .then(a.parent_packet_id.cmp(&b.parent_packet_id))
                .then(a.fragment_index.cmp(&b.fragment_index))
        });
    }

    /// Hand up finished packets. Doomed packets are reported as dropped
    /// straight away; complete ones leave in id order, and only once every
    /// lower id has left.
    pub fn release_ready(&mut self, now_ms: f64) -> Vec<Delivery> {
        let mut out = Vec::new();
        let doomed: Vec<PacketId> = self
            .packets
            .iter()
            .filter(|(_, p)| p.doomed)
            .map(|(id, _)| *id)
            .collect();
        for id in doomed {
            let p = self.packets.remove(&id).expect("listed");
            self.counters.dropped_bits += p.record.size_bits;
            self.counters.dropped_packets += 1;
            out.push(Delivery::Dropped { record: p.record });
        }
        while let Some(entry) = self.packets.first_entry() {
            if !entry.get().complete_by(now_ms) {
                break;
            }
            let p = entry.remove();
            debug_assert!(self.last_released.is_none_or(|l| p.record.id > l));
            self.last_released = Some(p.record.id);
            self.counters.released_bits += p.record.size_bits;
            self.counters.released_packets += 1;
            out.push(Delivery::Released {
                latency_ms: now_ms - p.record.arrival_time_ms,
                record: p.record,
            });
        }
        out
    }

    /// Packets admitted but neither released nor dropped yet.
    pub fn unfinished(&self) -> impl Iterator<Item = &PacketRecord> {
        self.packets.values().map(|p| &p.record)
    }

    pub fn ledger(&self) -> Ledger {
        let in_flight = self
            .packets
            .values()
            .map(|p| p.record.size_bits - p.unsent_bits)
            .sum();
        Ledger {
            in_flight_bits: in_flight,
            queued_bits: self.queued_bits,
            ..self.counters
        }
    }
}
