//! Live-packet capture plumbing.
//!
//! Each adapter (one per firewall queue) runs on its own thread, stamps
//! arriving packets and pushes them into a shared ingress channel. The
//! engine drains that channel once per tick and later issues exactly one
//! verdict per packet through a [`VerdictHandle`], which forwards it to the
//! owning adapter thread.

use std::collections::{HashMap, HashSet, VecDeque};
use std::io;
use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use crossbeam_channel::{unbounded, Receiver, Sender};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("queue {queue}: adapter disconnected")]
    Disconnected { queue: u16 },
    #[error("queue {queue}: cannot bind: {reason}")]
    Init { queue: u16, reason: String },
    #[error("verdict already issued for packet {token}")]
    DoubleVerdict { token: u64 },
    #[error("stale capture handle {token}")]
    StaleHandle { token: u64 },
    #[error("capture i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Release,
    Drop,
}

/// Reference to a packet held by the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CaptureHandle {
    pub hub: u32,
    pub queue: u16,
    pub kernel_id: u32,
    pub token: u64,
}

/// What an adapter hands over for one queued packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawPacket {
    pub kernel_id: u32,
    pub size_bytes: usize,
    /// Emulation-clock stamp; filled in by the hub when absent.
    pub timestamp_ms: Option<f64>,
}

/// One userspace packet queue.
pub trait CaptureAdapter: Send + 'static {
    fn queue(&self) -> u16;
    /// Wait up to `timeout` for the next packet.
    fn recv(&mut self, timeout: Duration) -> Result<Option<RawPacket>, CaptureError>;
    fn verdict(&mut self, kernel_id: u32, verdict: Verdict) -> Result<(), CaptureError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapturedPacket {
    pub handle: CaptureHandle,
    pub size_bits: u64,
    pub timestamp_ms: f64,
}

enum Ingress {
    Packet(CapturedPacket),
    Failed(CaptureError),
}

#[derive(Debug, Default)]
struct Registry {
    outstanding: HashMap<u64, CaptureHandle>,
    issued: u64,
}

/// Cloneable, thread-safe verdict entry point.
#[derive(Clone)]
pub struct VerdictHandle {
    hub: u32,
    registry: Arc<Mutex<Registry>>,
    next_token: Arc<AtomicU64>,
    routes: Arc<HashMap<u16, Sender<(u32, Verdict)>>>,
}

impl VerdictHandle {
    pub fn verdict(&self, handle: CaptureHandle, verdict: Verdict) -> Result<(), CaptureError> {
        if handle.hub != self.hub {
            return Err(CaptureError::StaleHandle { token: handle.token });
        }
        {
            let mut reg = self.registry.lock().expect("registry poisoned");
            if reg.outstanding.remove(&handle.token).is_none() {
                let issued = reg.issued.max(self.next_token.load(Ordering::SeqCst));
                return Err(if handle.token < issued {
                    CaptureError::DoubleVerdict { token: handle.token }
                } else {
                    CaptureError::StaleHandle { token: handle.token }
                });
            }
        }
        let route = self
            .routes
            .get(&handle.queue)
            .ok_or(CaptureError::StaleHandle { token: handle.token })?;
        route
            .send((handle.kernel_id, verdict))
            .map_err(|_| CaptureError::Disconnected { queue: handle.queue })
    }

    /// Packets received but not yet given a verdict.
    pub fn outstanding(&self) -> usize {
        self.registry.lock().expect("registry poisoned").outstanding.len()
    }

    /// Release everything still held. Returns how many were released.
    pub fn release_all(&self) -> usize {
        let pending: Vec<CaptureHandle> = {
            let reg = self.registry.lock().expect("registry poisoned");
            reg.outstanding.values().copied().collect()
        };
        pending
            .into_iter()
            .filter(|h| self.verdict(*h, Verdict::Release).is_ok())
            .count()
    }
}

/// Emulation clock shared with adapter threads, in ms since run start.
pub type SharedClock = Arc<dyn Fn() -> f64 + Send + Sync>;

static NEXT_HUB: AtomicU32 = AtomicU32::new(1);

/// Owns the adapter threads and the ingress side of the channel.
pub struct CaptureHub {
    rx: Receiver<Ingress>,
    stash: VecDeque<CapturedPacket>,
    verdicts: VerdictHandle,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl CaptureHub {
    pub fn start(adapters: Vec<Box<dyn CaptureAdapter>>, clock: SharedClock) -> Self {
        let hub = NEXT_HUB.fetch_add(1, Ordering::Relaxed);
        let (tx, rx) = unbounded();
        let registry = Arc::new(Mutex::new(Registry::default()));
        let next_token = Arc::new(AtomicU64::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let mut routes = HashMap::new();
        let mut threads = Vec::new();
        for mut adapter in adapters {
            let queue = adapter.queue();
            let (vtx, vrx) = unbounded::<(u32, Verdict)>();
            routes.insert(queue, vtx);
            let tx = tx.clone();
            let registry = Arc::clone(&registry);
            let next_token = Arc::clone(&next_token);
            let stop = Arc::clone(&stop);
            let clock = Arc::clone(&clock);
            let name = format!("capture-q{queue}");
            let t = std::thread::Builder::new()
                .name(name)
                .spawn(move || {
                    let apply = |adapter: &mut Box<dyn CaptureAdapter>| {
                        while let Ok((kid, v)) = vrx.try_recv() {
                            if let Err(e) = adapter.verdict(kid, v) {
                                log::warn!("queue {queue}: verdict for {kid} failed: {e}");
                            }
                        }
                    };
                    loop {
                        apply(&mut adapter);
                        if stop.load(Ordering::SeqCst) {
                            apply(&mut adapter);
                            break;
                        }
                        match adapter.recv(Duration::from_micros(500)) {
                            Ok(Some(raw)) => {
                                let token = {
                                    let mut reg = registry.lock().expect("registry poisoned");
                                    let token = next_token.fetch_add(1, Ordering::SeqCst);
                                    reg.issued = reg.issued.max(token + 1);
                                    let handle = CaptureHandle {
                                        hub,
                                        queue,
                                        kernel_id: raw.kernel_id,
                                        token,
                                    };
                                    reg.outstanding.insert(token, handle);
                                    handle
                                };
                                let pkt = CapturedPacket {
                                    handle: token,
                                    size_bits: raw.size_bytes as u64 * 8,
                                    timestamp_ms: raw.timestamp_ms.unwrap_or_else(|| clock()),
                                };
                                if tx.send(Ingress::Packet(pkt)).is_err() {
                                    break;
                                }
                            }
                            Ok(None) => {}
                            Err(e) => {
                                let _ = tx.send(Ingress::Failed(e));
                                // keep serving verdicts for packets already handed over
                                while !stop.load(Ordering::SeqCst) {
                                    apply(&mut adapter);
                                    std::thread::sleep(Duration::from_micros(500));
                                }
                                apply(&mut adapter);
                                break;
                            }
                        }
                    }
                })
                .expect("spawn capture thread");
            threads.push(t);
        }
        Self {
            rx,
            stash: VecDeque::new(),
            verdicts: VerdictHandle {
                hub,
                registry,
                next_token,
                routes: Arc::new(routes),
            },
            stop,
            threads,
        }
    }

    pub fn verdict_handle(&self) -> VerdictHandle {
        self.verdicts.clone()
    }

    /// All packets stamped at or before `tick_start_ms`, in stamp order.
    /// Later ones are held back for the next tick.
    pub fn poll(&mut self, tick_start_ms: f64) -> Result<Vec<CapturedPacket>, CaptureError> {
        loop {
            match self.rx.try_recv() {
                Ok(Ingress::Packet(p)) => self.stash.push_back(p),
                Ok(Ingress::Failed(e)) => return Err(e),
                Err(_) => break,
            }
        }
        let mut ready: Vec<CapturedPacket> = Vec::new();
        let mut later = VecDeque::new();
        for p in self.stash.drain(..) {
            if p.timestamp_ms <= tick_start_ms {
                ready.push(p);
            } else {
                later.push_back(p);
            }
        }
        self.stash = later;
        ready.sort_by(|a, b| a.timestamp_ms.total_cmp(&b.timestamp_ms).then(a.handle.token.cmp(&b.handle.token)));
        Ok(ready)
    }

    /// Release everything still held, then stop the adapter threads.
    pub fn shutdown(mut self) -> usize {
        self.finish()
    }

    fn finish(&mut self) -> usize {
        while let Ok(Ingress::Packet(p)) = self.rx.try_recv() {
            self.stash.push_back(p);
        }
        let released = self.verdicts.release_all();
        self.stop.store(true, Ordering::SeqCst);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
        released
    }
}

impl Drop for CaptureHub {
    fn drop(&mut self) {
        if !self.threads.is_empty() {
            self.finish();
        }
    }
}

#[derive(Debug, Default)]
struct KernelState {
    queues: HashMap<u16, VecDeque<RawPacket>>,
    verdicts: Vec<(u16, u32, Verdict)>,
    disconnected: HashSet<u16>,
    next_id: u32,
}

/// In-process stand-in for the kernel queue facility.
#[derive(Debug, Clone, Default)]
pub struct SimulatedKernel {
    state: Arc<Mutex<KernelState>>,
}

impl SimulatedKernel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Queue a packet; returns its kernel id.
    pub fn inject(&self, queue: u16, size_bytes: usize, timestamp_ms: Option<f64>) -> u32 {
        let mut s = self.state.lock().expect("kernel poisoned");
        s.next_id += 1;
        let kernel_id = s.next_id;
        s.queues.entry(queue).or_default().push_back(RawPacket {
            kernel_id,
            size_bytes,
            timestamp_ms,
        });
        kernel_id
    }

    pub fn disconnect(&self, queue: u16) {
        self.state.lock().expect("kernel poisoned").disconnected.insert(queue);
    }

    /// Verdicts applied so far, as (queue, kernel id, verdict).
    pub fn verdicts(&self) -> Vec<(u16, u32, Verdict)> {
        self.state.lock().expect("kernel poisoned").verdicts.clone()
    }

    pub fn adapter(&self, queue: u16) -> MemoryAdapter {
        MemoryAdapter {
            queue,
            kernel: self.clone(),
        }
    }
}

pub struct MemoryAdapter {
    queue: u16,
    kernel: SimulatedKernel,
}

impl CaptureAdapter for MemoryAdapter {
    fn queue(&self) -> u16 {
        self.queue
    }

    fn recv(&mut self, timeout: Duration) -> Result<Option<RawPacket>, CaptureError> {
        {
            let mut s = self.kernel.state.lock().expect("kernel poisoned");
            if s.disconnected.contains(&self.queue) {
                return Err(CaptureError::Disconnected { queue: self.queue });
            }
            if let Some(p) = s.queues.get_mut(&self.queue).and_then(VecDeque::pop_front) {
                return Ok(Some(p));
            }
        }
        std::thread::sleep(timeout.min(Duration::from_micros(200)));
        Ok(None)
    }

    fn verdict(&mut self, kernel_id: u32, verdict: Verdict) -> Result<(), CaptureError> {
        let mut s = self.kernel.state.lock().expect("kernel poisoned");
        s.verdicts.push((self.queue, kernel_id, verdict));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Instant;

    fn zero_clock() -> SharedClock {
        Arc::new(|| 0.0)
    }

    fn poll_until(hub: &mut CaptureHub, at: f64, n: usize) -> Vec<CapturedPacket> {
        let deadline = Instant::now() + Duration::from_secs(5);
        let mut got = Vec::new();
        while got.len() < n && Instant::now() < deadline {
            got.extend(hub.poll(at).unwrap());
            std::thread::sleep(Duration::from_millis(1));
        }
        got
    }

    #[test]
    fn empty_queue_polls_empty() {
        let k = SimulatedKernel::new();
        let mut hub = CaptureHub::start(vec![Box::new(k.adapter(3))], zero_clock());
        std::thread::sleep(Duration::from_millis(5));
        assert!(hub.poll(10.0).unwrap().is_empty());
        assert_eq!(hub.shutdown(), 0);
    }

    #[test]
    fn datagram_size_in_bits_and_burst_order() {
        let k = SimulatedKernel::new();
        let mut hub = CaptureHub::start(vec![Box::new(k.adapter(3))], zero_clock());
        for i in 0..20 {
            k.inject(3, 1500, Some(f64::from(i) * 0.1));
        }
        let got = poll_until(&mut hub, 10.0, 20);
        assert_eq!(got.len(), 20);
        assert!(got.iter().all(|p| p.size_bits == 12_000));
        assert!(got.windows(2).all(|w| w[0].handle.token < w[1].handle.token));
        assert!(got.windows(2).all(|w| w[0].timestamp_ms <= w[1].timestamp_ms));
        assert_eq!(hub.shutdown(), 20);
        assert_eq!(k.verdicts().len(), 20);
    }

    #[test]
    fn packets_after_tick_start_wait_for_next_tick() {
        let k = SimulatedKernel::new();
        let mut hub = CaptureHub::start(vec![Box::new(k.adapter(1))], zero_clock());
        k.inject(1, 100, Some(5.5));
        k.inject(1, 100, Some(4.0));
        let first = poll_until(&mut hub, 5.0, 1);
        std::thread::sleep(Duration::from_millis(5));
        let mut first = first;
        first.extend(hub.poll(5.0).unwrap());
        assert_eq!(first.len(), 1);
        assert_eq!(first[0].timestamp_ms, 4.0);
        let second = hub.poll(6.0).unwrap();
        assert_eq!(second.len(), 1);
        hub.shutdown();
    }

    #[test]
    fn verdict_contract() {
        let k = SimulatedKernel::new();
        let mut hub = CaptureHub::start(vec![Box::new(k.adapter(7))], zero_clock());
        let kid = k.inject(7, 64, Some(0.0));
        let p = poll_until(&mut hub, 1.0, 1).remove(0);
        let v = hub.verdict_handle();
        assert_eq!(v.outstanding(), 1);
        v.verdict(p.handle, Verdict::Drop).unwrap();
        assert!(matches!(v.verdict(p.handle, Verdict::Release), Err(CaptureError::DoubleVerdict { .. })));
        let forged = CaptureHandle { token: 999, ..p.handle };
        assert!(matches!(v.verdict(forged, Verdict::Release), Err(CaptureError::StaleHandle { .. })));
        let other_hub = CaptureHandle { hub: 0, ..p.handle };
        assert!(matches!(v.verdict(other_hub, Verdict::Release), Err(CaptureError::StaleHandle { .. })));
        assert_eq!(v.outstanding(), 0);
        hub.shutdown();
        assert_eq!(k.verdicts(), vec![(7, kid, Verdict::Drop)]);
    }

    #[test]
    fn disconnect_is_reported() {
        let k = SimulatedKernel::new();
        let mut hub = CaptureHub::start(vec![Box::new(k.adapter(2))], zero_clock());
        k.disconnect(2);
        let deadline = Instant::now() + Duration::from_secs(5);
        let err = loop {
            match hub.poll(0.0) {
                Err(e) => break e,
                Ok(_) if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(1)),
                Ok(_) => panic!("no disconnect"),
            }
        };
        assert!(matches!(err, CaptureError::Disconnected { queue: 2 }));
    }

    #[test]
    fn verdicts_from_another_thread() {
        let k = SimulatedKernel::new();
        let mut hub = CaptureHub::start(vec![Box::new(k.adapter(4))], zero_clock());
        for _ in 0..10 {
            k.inject(4, 10, None);
        }
        let got = poll_until(&mut hub, 0.0, 10);
        let v = hub.verdict_handle();
        std::thread::spawn(move || {
            for p in got {
                v.verdict(p.handle, Verdict::Release).unwrap();
            }
        })
        .join()
        .unwrap();
        hub.shutdown();
        assert_eq!(k.verdicts().len(), 10);
    }
}
