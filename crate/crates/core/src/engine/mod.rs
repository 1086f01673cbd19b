//! The 1 ms emulation loop.
//!
//! Every tick runs the same eight stages for both directions: ingest
//! traffic, collect scheduling requests, refresh CSI where due (UE
//! movement happens here), allocate the grids, segment packets into
//! transport blocks, draw HARQ outcomes, requeue NACKed blocks and release
//! finished packets. One metrics row per UE and direction follows.

pub mod clock;

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::config::{ScenarioConfig, TrafficConfig, UeConfig};
use crate::error::Error;
use crate::mac::{allocate, build_grid, AllocParams, Amc, Candidate, SchedulerState, TbsGrant, UeMetricView};
use crate::metrics::{CsvSink, MetricsRow, MetricsSink, NullSink};
use crate::mobility::MobilityState;
use crate::phy::channel::{CsiContext, Shadowing};
use crate::phy::{interference_dbm, ChannelState, LinkBudget, RankTable, UeChannel};
use crate::rng::{stream_rng, SimRng, Stream};
use crate::traffic::capture::{CaptureAdapter, CaptureHub, SharedClock, VerdictHandle};
use crate::traffic::{Origin, PacketId, PacketRecord, TgState, Verdict};
use crate::types::{Direction, Position, UeId};
use crate::ue::stack::TxOpportunity;
use crate::ue::{Delivery, DirectionStack, Ledger};

pub use clock::{Clock, ManualClock, SystemClock, TickClock};

/// The per-tick stages, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    SchedulingRequest,
    CsiRefresh,
    Allocate,
    Segment,
    Harq,
    Requeue,
    Release,
}

impl Stage {
    pub const ORDER: [Stage; 8] = [
        Stage::Ingest,
        Stage::SchedulingRequest,
        Stage::CsiRefresh,
        Stage::Allocate,
        Stage::Segment,
        Stage::Harq,
        Stage::Requeue,
        Stage::Release,
    ];
}

/// Per-UE, per-direction outcome of one tick.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UeTick {
    pub granted_bits: u64,
    pub grants: u32,
    pub released_packets: u32,
    pub released_bits: u64,
    pub dropped_packets: u32,
    pub dropped_bits: u64,
    pub latency_sum_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickReport {
    pub tick_index: u64,
    /// Indexed like [`Engine::ue_ids`], then by direction.
    pub ues: Vec<[UeTick; 2]>,
    pub overrun: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DirectionSummary {
    pub granted_bits: u64,
    pub ingested_bits: u64,
    pub released_bits: u64,
    pub dropped_bits: u64,
    pub released_packets: u64,
    pub dropped_packets: u64,
    pub overflow_packets: u64,
    pub latency_sum_ms: f64,
}

impl DirectionSummary {
    pub fn mean_latency_ms(&self) -> Option<f64> {
        (self.released_packets > 0).then(|| self.latency_sum_ms / self.released_packets as f64)
    }

    pub fn loss_rate(&self) -> f64 {
        let done = self.released_packets + self.dropped_packets;
        if done == 0 {
            0.0
        } else {
            self.dropped_packets as f64 / done as f64
        }
    }

    /// Released bits per second over `duration_ms`.
    pub fn throughput_bps(&self, duration_ms: u64) -> f64 {
        if duration_ms == 0 {
            0.0
        } else {
            self.released_bits as f64 * 1000.0 / duration_ms as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeSummary {
    pub ue_id: UeId,
    pub dl: DirectionSummary,
    pub ul: DirectionSummary,
}

impl UeSummary {
    pub fn dir(&self, d: Direction) -> &DirectionSummary {
        match d {
            Direction::Dl => &self.dl,
            Direction::Ul => &self.ul,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub ticks: u64,
    pub duration_ms: u64,
    pub ues: Vec<UeSummary>,
    pub deadline_misses: u64,
    pub wall_time: Duration,
    /// Captured packets released at shutdown without finishing.
    pub fail_open_releases: u64,
}

impl RunSummary {
    pub fn ue(&self, id: UeId) -> Option<&UeSummary> {
        self.ues.iter().find(|u| u.ue_id == id)
    }

    pub fn mean_tick_period_ms(&self) -> f64 {
        if self.ticks == 0 {
            0.0
        } else {
            self.wall_time.as_secs_f64() * 1000.0 / self.ticks as f64
        }
    }

    pub fn total_released_bits(&self, d: Direction) -> u64 {
        self.ues.iter().map(|u| u.dir(d).released_bits).sum()
    }
}

struct UeContext {
    config: UeConfig,
    mobility: MobilityState,
    mobility_rng: SimRng,
    shadow: Shadowing,
    channel: [UeChannel; 2],
    stack: [DirectionStack; 2],
    tg: Option<TgState>,
    traffic_rng: [SimRng; 2],
    harq_rng: [SimRng; 2],
    next_captured_id: [u64; 2],
    totals: [DirectionSummary; 2],
}

/// Optional collaborators for an [`Engine`].
pub struct EngineOptions {
    pub sink: Option<Box<dyn MetricsSink>>,
    /// Capture adapters; when absent and the scenario uses captured
    /// traffic, firewall queues are opened.
    pub adapters: Option<Vec<Box<dyn CaptureAdapter>>>,
    pub clock: Box<dyn Clock>,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            sink: None,
            adapters: None,
            clock: Box::new(SystemClock::default()),
        }
    }
}

pub struct Engine {
    cfg: ScenarioConfig,
    amc: Amc,
    rank: RankTable,
    ues: Vec<UeContext>,
    sched: [SchedulerState; 2],
    sink: Box<dyn MetricsSink>,
    capture: Option<CaptureHub>,
    verdicts: Option<VerdictHandle>,
    queue_map: HashMap<u16, (usize, Direction)>,
    wall: Box<dyn Clock>,
    clock: TickClock,
    trace: Option<Vec<(u64, Stage)>>,
    tick_wall_start: Duration,
    fail_open_releases: u64,
    finished: bool,
}

fn dir_stream(d: Direction, dl: Stream, ul: Stream) -> Stream {
    match d {
        Direction::Dl => dl,
        Direction::Ul => ul,
    }
}

impl Engine {
    /// Engine with default collaborators: a CSV sink when the scenario
    /// names a metrics path, the system clock, and firewall queues for
    /// captured traffic.
    pub fn new(cfg: ScenarioConfig) -> Result<Self, Error> {
        Self::with_options(cfg, EngineOptions::default())
    }

    pub fn with_options(cfg: ScenarioConfig, opts: EngineOptions) -> Result<Self, Error> {
        cfg.validate()?;
        let amc = Amc::from_config(&cfg)?;
        let rank = RankTable::from_amc(&amc);
        let gnb = cfg.channel.gnb_position();
        let ch = &cfg.channel;
        let mut ues: Vec<UeContext> = Vec::with_capacity(cfg.ue_list.len());
        let mut sorted = cfg.ue_list.clone();
        sorted.sort_by_key(|u| u.id);
        for u in sorted {
            let seed = cfg.rng_seed;
            let mut mobility_rng = stream_rng(seed, u.id, Stream::Mobility);
            let mobility = MobilityState::new(u.mobility.clone(), u.position, &mut mobility_rng);
            let shadow = Shadowing::new(ch.scenario, u.los, ch.shadowing, u.position, stream_rng(seed, u.id, Stream::Shadowing));
            let channel = Direction::ALL.map(|d| {
                let (tx, at) = match d {
                    Direction::Dl => (ch.tx_power_dbm, u.position),
                    Direction::Ul => (ch.ue_tx_power_dbm, gnb),
                };
                let budget = LinkBudget {
                    tx_power_dbm: tx,
                    gain_tx_dbi: ch.antenna_gain_tx_dbi,
                    gain_rx_dbi: ch.antenna_gain_rx_dbi,
                    noise_dbm: ch.noise_dbm(d),
                    interference_dbm: interference_dbm(
                        &ch.interferers,
                        &at,
                        ch.scenario,
                        u.los,
                        ch.antenna_gain_tx_dbi,
                        ch.antenna_gain_rx_dbi,
                    ),
                };
                UeChannel::new(
                    budget,
                    ch.scenario,
                    u.los,
                    cfg.carrier.frequency_hz,
                    ch.fading,
                    stream_rng(seed, u.id, dir_stream(d, Stream::FadingDl, Stream::FadingUl)),
                )
            });
            let tg = match &u.traffic {
                TrafficConfig::Simulated {
                    dl_bps,
                    ul_bps,
                    packet_size_bits,
                    jitter_std_fraction,
                } => Some(TgState::new(*dl_bps, *ul_bps, *packet_size_bits, *jitter_std_fraction)),
                TrafficConfig::Captured { .. } => None,
            };
            ues.push(UeContext {
                stack: [
                    DirectionStack::new(u.buffer_capacity_bits),
                    DirectionStack::new(u.buffer_capacity_bits),
                ],
                traffic_rng: Direction::ALL.map(|d| stream_rng(seed, u.id, dir_stream(d, Stream::TrafficDl, Stream::TrafficUl))),
                harq_rng: Direction::ALL.map(|d| stream_rng(seed, u.id, dir_stream(d, Stream::HarqDl, Stream::HarqUl))),
                config: u,
                mobility,
                mobility_rng,
                shadow,
                channel,
                tg,
                next_captured_id: [0; 2],
                totals: Default::default(),
            });
        }
        let ids: Vec<UeId> = ues.iter().map(|u| u.config.id).collect();
        let sched = [
            SchedulerState::new(cfg.scheduler.ema_alpha, ids.iter().copied()),
            SchedulerState::new(cfg.scheduler.ema_alpha, ids.iter().copied()),
        ];

        let mut queue_map = HashMap::new();
        for (i, u) in ues.iter().enumerate() {
            if let TrafficConfig::Captured { dl_queue, ul_queue } = u.config.traffic {
                queue_map.insert(dl_queue, (i, Direction::Dl));
                queue_map.insert(ul_queue, (i, Direction::Ul));
            }
        }

        let sink: Box<dyn MetricsSink> = match (opts.sink, &cfg.metrics_path) {
            (Some(s), _) => s,
            (None, Some(p)) => Box::new(CsvSink::create(p).map_err(Error::Metrics)?),
            (None, None) => Box::new(NullSink),
        };

        let wall = opts.clock;
        let start = wall.now();
        let mut engine = Self {
            clock: TickClock::new(cfg.run_mode, start),
            cfg,
            amc,
            rank,
            ues,
            sched,
            sink,
            capture: None,
            verdicts: None,
            queue_map,
            wall,
            trace: None,
            tick_wall_start: start,
            fail_open_releases: 0,
            finished: false,
        };
        if !engine.queue_map.is_empty() {
            let adapters = match opts.adapters {
                Some(a) => a,
                None => open_firewall_queues(engine.queue_map.keys().copied())?,
            };
            let origin = Instant::now();
            let clock: SharedClock = Arc::new(move || origin.elapsed().as_secs_f64() * 1000.0);
            let hub = CaptureHub::start(adapters, clock);
            engine.verdicts = Some(hub.verdict_handle());
            engine.capture = Some(hub);
        }
        Ok(engine)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn ue_ids(&self) -> Vec<UeId> {
        self.ues.iter().map(|u| u.config.id).collect()
    }

    fn index_of(&self, id: UeId) -> Option<usize> {
        self.ues.binary_search_by_key(&id, |u| u.config.id).ok()
    }

    pub fn tick_index(&self) -> u64 {
        self.clock.tick_index
    }

    pub fn ledger(&self, id: UeId, d: Direction) -> Option<Ledger> {
        self.index_of(id).map(|i| self.ues[i].stack[d.index()].ledger())
    }

    pub fn channel_state(&self, id: UeId, d: Direction) -> Option<&ChannelState> {
        self.index_of(id).and_then(|i| self.ues[i].channel[d.index()].state())
    }

    pub fn position(&self, id: UeId) -> Option<Position> {
        self.index_of(id).map(|i| self.ues[i].mobility.position)
    }

    pub fn average_throughput_bps(&self, id: UeId, d: Direction) -> f64 {
        self.sched[d.index()].throughput_bps(id)
    }

    pub fn amc(&self) -> &Amc {
        &self.amc
    }

    pub fn rank_table(&self) -> &RankTable {
        &self.rank
    }

    /// Record the stage sequence of every following tick.
    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn trace(&self) -> &[(u64, Stage)] {
        self.trace.as_deref().unwrap_or(&[])
    }

    fn mark(&mut self, stage: Stage) {
        let tick = self.clock.tick_index;
        if let Some(t) = &mut self.trace {
            t.push((tick, stage));
        }
    }

    fn verdict(&mut self, record: &PacketRecord, v: Verdict) -> Result<(), Error> {
        if let (Some(h), Some(vh)) = (record.captured_handle(), &self.verdicts) {
            vh.verdict(h, v)?;
        }
        Ok(())
    }

    fn ingest(&mut self, now: f64, report: &mut TickReport) -> Result<(), Error> {
        let mut rejected: Vec<PacketRecord> = Vec::new();
        for (i, ue) in self.ues.iter_mut().enumerate() {
            let Some(tg) = &mut ue.tg else { continue };
            for d in Direction::ALL {
                for p in tg.generate(d, now, &mut ue.traffic_rng[d.index()]) {
                    let bits = p.size_bits;
                    if let Err(p) = ue.stack[d.index()].admit(p) {
                        report.ues[i][d.index()].dropped_bits += bits;
                        report.ues[i][d.index()].dropped_packets += 1;
                        rejected.push(p);
                    }
                }
            }
        }
        if let Some(hub) = &mut self.capture {
            let wall_ms = (self.tick_wall_start - self.clock.start_wallclock).as_secs_f64() * 1000.0;
            let wall_ms = wall_ms.max(now);
            for c in hub.poll(wall_ms)? {
                let Some(&(i, d)) = self.queue_map.get(&c.handle.queue) else {
                    continue;
                };
                let ue = &mut self.ues[i];
                let id = ue.next_captured_id[d.index()];
                ue.next_captured_id[d.index()] += 1;
                let record = PacketRecord {
                    id: PacketId(id),
                    size_bits: c.size_bits.max(1),
                    arrival_time_ms: now,
                    direction: d,
                    origin: Origin::Captured(c.handle),
                    prev_packet_id: id.checked_sub(1).map(PacketId),
                };
                let bits = record.size_bits;
                if let Err(p) = ue.stack[d.index()].admit(record) {
                    report.ues[i][d.index()].dropped_bits += bits;
                    report.ues[i][d.index()].dropped_packets += 1;
                    rejected.push(p);
                }
            }
        }
        for p in rejected {
            self.verdict(&p, Verdict::Drop)?;
        }
        Ok(())
    }

    fn refresh_csi(&mut self, now: f64) {
        let gnb = self.cfg.channel.gnb_position();
        let mcfg = &self.cfg.mobility;
        let csi_mode = self.cfg.scheduler.csi;
        for ue in &mut self.ues {
            if self.clock.tick_index > 0 {
                ue.mobility.step(mcfg, 0.001, &mut ue.mobility_rng);
            }
            let pos = ue.mobility.position;
            let speed = ue.mobility.speed_mps();
            if Direction::ALL.iter().any(|d| ue.channel[d.index()].needs_refresh(now)) {
                let shadow = ue.shadow.update(&pos);
                for d in Direction::ALL {
                    let c = &mut ue.channel[d.index()];
                    if c.needs_refresh(now) {
                        let ctx = CsiContext {
                            amc: &self.amc,
                            rank: &self.rank,
                            csi_mode,
                            prb_count: self.cfg.carrier.prb_count(d),
                            max_layers: ue.config.max_mimo_layers,
                        };
                        c.csi_report(now, &gnb, &pos, shadow, speed, &ctx);
                    }
                }
            }
        }
    }

    fn allocate_direction(&mut self, d: Direction, now: f64, pending: &mut [u64], hol: &[Option<f64>]) -> Vec<Vec<TbsGrant>> {
        let mut per_ue: Vec<Vec<TbsGrant>> = vec![Vec::new(); self.ues.len()];
        if pending.iter().all(|&p| p == 0) {
            return per_ue;
        }
        let sched = &self.sched[d.index()];
        let mut candidates: Vec<(usize, Candidate)> = self
            .ues
            .iter()
            .enumerate()
            .filter(|(i, _)| pending[*i] > 0)
            .map(|(i, u)| {
                (
                    i,
                    Candidate {
                        view: UeMetricView {
                            ue_id: u.config.id,
                            average_throughput_bps: sched.throughput_bps(u.config.id),
                            head_of_line_arrival_ms: hol[i],
                            priority_weight: u.config.priority_weight,
                        },
                        csi: u.channel[d.index()].state().expect("refreshed"),
                        pending_bits: pending[i],
                    },
                )
            })
            .collect();
        let (idx, mut cands): (Vec<usize>, Vec<Candidate>) = candidates.drain(..).unzip();
        for carrier in 0..self.cfg.carrier.component_carriers {
            let mut grid = build_grid(&self.cfg.carrier, &self.cfg.duplex, d, self.clock.tick_index);
            let params = AllocParams {
                metric: self.cfg.scheduler.metric,
                amc: &self.amc,
                scaling_factor: self.cfg.scheduler.scaling_factor,
                overhead: self.cfg.scheduler.overhead(d),
                carrier,
                now_ms: now,
            };
            for g in allocate(&mut grid, &mut cands, &params) {
                let k = cands.iter().position(|c| c.view.ue_id == g.ue_id).expect("candidate");
                per_ue[idx[k]].push(g);
            }
        }
        for (k, c) in cands.iter().enumerate() {
            pending[idx[k]] = c.pending_bits;
        }
        per_ue
    }

    /// Run one tick without pacing.
    pub fn step(&mut self) -> Result<TickReport, Error> {
        let tick = self.clock.tick_index;
        let now = tick as f64;
        let slot_ms = self.cfg.carrier.slot_duration_ms();
        let n = self.ues.len();
        let mut report = TickReport {
            tick_index: tick,
            ues: vec![Default::default(); n],
            overrun: false,
        };

        self.mark(Stage::Ingest);
        self.ingest(now, &mut report)?;

        self.mark(Stage::SchedulingRequest);
        let mut pending: [Vec<u64>; 2] = Direction::ALL.map(|d| {
            self.ues
                .iter()
                .map(|u| u.stack[d.index()].scheduling_request(now))
                .collect()
        });
        let hol: [Vec<Option<f64>>; 2] = Direction::ALL.map(|d| {
            self.ues
                .iter()
                .map(|u| u.stack[d.index()].head_of_line_arrival_ms(now))
                .collect()
        });

        self.mark(Stage::CsiRefresh);
        self.refresh_csi(now);

        self.mark(Stage::Allocate);
        let mut grants: [Vec<Vec<TbsGrant>>; 2] = Default::default();
        for d in Direction::ALL {
            grants[d.index()] = self.allocate_direction(d, now, &mut pending[d.index()], &hol[d.index()]);
            for (i, g) in grants[d.index()].iter().enumerate() {
                let bits: u64 = g.iter().map(|g| g.bits).sum();
                report.ues[i][d.index()].granted_bits = bits;
                report.ues[i][d.index()].grants = g.len() as u32;
                self.sched[d.index()].update(self.ues[i].config.id, bits);
            }
        }

        self.mark(Stage::Segment);
        let mut sent: [Vec<Vec<crate::ue::TransportBlock>>; 2] = Default::default();
        for d in Direction::ALL {
            for (i, ue) in self.ues.iter_mut().enumerate() {
                let g = &mut grants[d.index()][i];
                g.sort_by_key(|g| (g.slot, g.carrier, g.rbg_index));
                let ops: Vec<TxOpportunity> = g
                    .iter()
                    .map(|g| TxOpportunity {
                        tx_ms: now + f64::from(g.slot) * slot_ms,
                        bits: g.bits,
                        mcs: g.mcs_index,
                        sinr_db: g.sinr_db,
                    })
                    .collect();
                sent[d.index()].push(ue.stack[d.index()].segment(now, &ops));
            }
        }

        self.mark(Stage::Harq);
        let mut nacked: [Vec<Vec<crate::ue::TransportBlock>>; 2] = Default::default();
        for d in Direction::ALL {
            for (i, ue) in self.ues.iter_mut().enumerate() {
                let blocks = std::mem::take(&mut sent[d.index()][i]);
                let bler = &self.amc.bler;
                let n = ue.stack[d.index()].evaluate_harq(
                    blocks,
                    |m, s| bler.bler(m, s),
                    &self.cfg.harq,
                    slot_ms,
                    &mut ue.harq_rng[d.index()],
                );
                nacked[d.index()].push(n);
            }
        }

        self.mark(Stage::Requeue);
        for d in Direction::ALL {
            for (i, ue) in self.ues.iter_mut().enumerate() {
                ue.stack[d.index()].requeue(std::mem::take(&mut nacked[d.index()][i]));
            }
        }

        self.mark(Stage::Release);
        let mut verdicts: Vec<(PacketRecord, Verdict)> = Vec::new();
        for d in Direction::ALL {
            for (i, ue) in self.ues.iter_mut().enumerate() {
                let r = &mut report.ues[i][d.index()];
                for delivery in ue.stack[d.index()].release_ready(now) {
                    match delivery {
                        Delivery::Released { record, latency_ms } => {
                            r.released_packets += 1;
                            r.released_bits += record.size_bits;
                            r.latency_sum_ms += latency_ms;
                            if record.captured_handle().is_some() {
                                verdicts.push((record, Verdict::Release));
                            }
                        }
                        Delivery::Dropped { record } => {
                            r.dropped_packets += 1;
                            r.dropped_bits += record.size_bits;
                            if record.captured_handle().is_some() {
                                verdicts.push((record, Verdict::Drop));
                            }
                        }
                    }
                }
            }
        }
        for (record, v) in verdicts {
            self.verdict(&record, v)?;
        }

        let mut rows = Vec::with_capacity(2 * n);
        for (i, ue) in self.ues.iter_mut().enumerate() {
            for d in Direction::ALL {
                let r = &report.ues[i][d.index()];
                let t = &mut ue.totals[d.index()];
                t.granted_bits += r.granted_bits;
                t.released_bits += r.released_bits;
                t.dropped_bits += r.dropped_bits;
                t.released_packets += u64::from(r.released_packets);
                t.dropped_packets += u64::from(r.dropped_packets);
                t.latency_sum_ms += r.latency_sum_ms;
                let csi = ue.channel[d.index()].state().expect("refreshed");
                rows.push(MetricsRow {
                    time_ms: tick,
                    ue_id: ue.config.id,
                    direction: d,
                    granted_bits: r.granted_bits,
                    released_bits: r.released_bits,
                    dropped_bits: r.dropped_bits,
                    buffer_bits: ue.stack[d.index()].buffer_bits(),
                    sinr_db: csi.wideband_sinr_db,
                    mcs: csi.wideband_mcs,
                    cqi: csi.cqi_index,
                    ri: csi.rank_indicator,
                    mean_packet_latency_ms: (r.released_packets > 0)
                        .then(|| r.latency_sum_ms / f64::from(r.released_packets)),
                    pos_x: ue.mobility.position[0],
                    pos_y: ue.mobility.position[1],
                });
            }
        }
        self.sink.write_rows(&rows).map_err(Error::Metrics)?;

        let misses = self.clock.deadline_miss_count;
        self.clock.pace(self.wall.as_ref());
        report.overrun = self.clock.deadline_miss_count > misses;
        self.tick_wall_start = self.wall.now();
        Ok(report)
    }

    /// Release every captured packet still held, stop the capture threads
    /// and flush the metrics sink.
    fn shutdown(&mut self) -> Result<(), Error> {
        if self.finished {
            return Ok(());
        }
        self.finished = true;
        if let Some(vh) = &self.verdicts {
            let mut released = 0;
            for ue in &self.ues {
                for d in Direction::ALL {
                    for r in ue.stack[d.index()].unfinished() {
                        if let Some(h) = r.captured_handle() {
                            if vh.verdict(h, Verdict::Release).is_ok() {
                                released += 1;
                            }
                        }
                    }
                }
            }
            self.fail_open_releases += released;
        }
        if let Some(hub) = self.capture.take() {
            self.fail_open_releases += hub.shutdown() as u64;
        }
        self.sink.finish().map_err(Error::Metrics)
    }

    pub fn summary(&self, wall_time: Duration) -> RunSummary {
        RunSummary {
            ticks: self.clock.tick_index,
            duration_ms: self.clock.tick_index,
            ues: self
                .ues
                .iter()
                .map(|u| {
                    let fill = |d: Direction| {
                        let l = u.stack[d.index()].ledger();
                        DirectionSummary {
                            ingested_bits: l.ingested_bits,
                            overflow_packets: l.overflow_packets,
                            ..u.totals[d.index()].clone()
                        }
                    };
                    UeSummary {
                        ue_id: u.config.id,
                        dl: fill(Direction::Dl),
                        ul: fill(Direction::Ul),
                    }
                })
                .collect(),
            deadline_misses: self.clock.deadline_miss_count,
            wall_time,
            fail_open_releases: self.fail_open_releases,
        }
    }

    /// Run the configured number of ticks.
    pub fn run(mut self) -> Result<RunSummary, Error> {
        let start = self.wall.now();
        self.clock = TickClock::new(self.cfg.run_mode, start);
        self.tick_wall_start = start;
        let result = (0..self.cfg.duration_ms).try_for_each(|_| self.step().map(|_| ()));
        let wall = self.wall.now() - start;
        let closed = self.shutdown();
        result?;
        closed?;
        Ok(self.summary(wall))
    }
}

impl Drop for Engine {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}

#[cfg(target_os = "linux")]
fn open_firewall_queues(queues: impl Iterator<Item = u16>) -> Result<Vec<Box<dyn CaptureAdapter>>, Error> {
    let mut qs: Vec<u16> = queues.collect();
    qs.sort_unstable();
    let mut out: Vec<Box<dyn CaptureAdapter>> = Vec::new();
    for q in qs {
        out.push(Box::new(crate::traffic::nfqueue::NfQueue::open(q)?));
    }
    Ok(out)
}

#[cfg(not(target_os = "linux"))]
fn open_firewall_queues(queues: impl Iterator<Item = u16>) -> Result<Vec<Box<dyn CaptureAdapter>>, Error> {
    let q = queues.min().unwrap_or(0);
    Err(crate::traffic::CaptureError::Init {
        queue: q,
        reason: "firewall queues are only supported on Linux".into(),
    }
    .into())
}

/// Build an engine with default collaborators and run it.
pub fn run(cfg: ScenarioConfig) -> Result<RunSummary, Error> {
    Engine::new(cfg)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunMode;
    use crate::metrics::MemorySink;
    use crate::traffic::capture::SimulatedKernel;
    use std::path::Path;

    fn scenario(extra: &str) -> ScenarioConfig {
        scenario_in(RunMode::FastForward, extra)
    }

    fn scenario_in(mode: RunMode, extra: &str) -> ScenarioConfig {
        let mode = match mode {
            RunMode::RealTime => "realtime",
            RunMode::FastForward => "fast",
        };
        let text = format!(
            r#"
schema_version = 1
run_mode = "{mode}"
duration_ms = 200
rng_seed = 7
[carrier]
frequency_hz = 3.5e9
dl_bandwidth_hz = 40e6
ul_bandwidth_hz = 40e6
numerology = 1
prb_count_override = 106
{extra}
"#
        );
        ScenarioConfig::from_toml_str(&text, Path::new(".")).unwrap()
    }

    fn one_ue(traffic: &str) -> String {
        format!(
            r#"
[[ue]]
id = 1
position = [200.0, 0.0, 1.5]
traffic = {traffic}
"#
        )
    }

    #[test]
    fn empty_scenario_runs_all_ticks() {
        let mut cfg = scenario("");
        cfg.duration_ms = 10;
        let s = Engine::new(cfg).unwrap().run().unwrap();
        assert_eq!(s.ticks, 10);
        assert!(s.ues.is_empty());
    }

    #[test]
    fn stage_order_every_tick() {
        let cfg = scenario(&one_ue(r#"{ kind = "simulated", dl_bps = 5e6, ul_bps = 1e6, packet_size_bits = 12000 }"#));
        let mut e = Engine::new(cfg).unwrap();
        e.enable_trace();
        for _ in 0..20 {
            e.step().unwrap();
        }
        let trace = e.trace();
        assert_eq!(trace.len(), 20 * 8);
        for (t, chunk) in trace.chunks(8).enumerate() {
            assert!(chunk.iter().all(|(tick, _)| *tick == t as u64));
            let stages: Vec<Stage> = chunk.iter().map(|(_, s)| *s).collect();
            assert_eq!(stages, Stage::ORDER);
        }
    }

    #[test]
    fn metrics_rows_per_tick_and_direction() {
        let mut cfg = scenario(&one_ue(r#"{ kind = "simulated", dl_bps = 5e6, ul_bps = 1e6, packet_size_bits = 12000 }"#));
        cfg.duration_ms = 50;
        let sink = MemorySink::new();
        let e = Engine::with_options(
            cfg,
            EngineOptions {
                sink: Some(Box::new(sink.clone())),
                ..Default::default()
            },
        )
        .unwrap();
        let s = e.run().unwrap();
        let rows = sink.rows();
        assert_eq!(rows.len(), 100);
        let released: u64 = rows.iter().filter(|r| r.direction == Direction::Dl).map(|r| r.released_bits).sum();
        assert_eq!(released, s.ues[0].dl.released_bits);
        assert!(released > 0);
    }

    #[test]
    fn ledger_balances_every_tick() {
        let cfg = scenario(&one_ue(r#"{ kind = "simulated", dl_bps = 400e6, ul_bps = 50e6, packet_size_bits = 12000 }"#));
        let mut e = Engine::new(cfg).unwrap();
        for _ in 0..200 {
            e.step().unwrap();
            for d in Direction::ALL {
                assert!(e.ledger(UeId(1), d).unwrap().balanced());
            }
        }
    }

    #[test]
    fn captured_packets_flow_and_get_verdicts() {
        let mut cfg = scenario_in(RunMode::RealTime, &one_ue(r#"{ kind = "captured", dl_queue = 10, ul_queue = 11 }"#));
        cfg.duration_ms = 80;
        let k = SimulatedKernel::new();
        for _ in 0..20 {
            k.inject(10, 1500, Some(0.0));
        }
        k.inject(11, 100, Some(0.0));
        let e = Engine::with_options(
            cfg,
            EngineOptions {
                adapters: Some(vec![Box::new(k.adapter(10)), Box::new(k.adapter(11))]),
                ..Default::default()
            },
        )
        .unwrap();
        let s = e.run().unwrap();
        let v = k.verdicts();
        assert_eq!(v.len(), 21);
        let mut ids: Vec<u32> = v.iter().map(|x| x.1).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 21);
        let u = &s.ues[0];
        assert_eq!(u.dl.released_packets + u.dl.dropped_packets + s.fail_open_releases, 21 - u.ul.released_packets - u.ul.dropped_packets);
    }

    #[test]
    fn capture_loss_aborts_run() {
        let mut cfg = scenario_in(RunMode::RealTime, &one_ue(r#"{ kind = "captured", dl_queue = 10, ul_queue = 11 }"#));
        cfg.duration_ms = 500;
        let k = SimulatedKernel::new();
        k.disconnect(10);
        let e = Engine::with_options(
            cfg,
            EngineOptions {
                adapters: Some(vec![Box::new(k.adapter(10)), Box::new(k.adapter(11))]),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(matches!(e.run(), Err(Error::Capture(_))));
    }
}
