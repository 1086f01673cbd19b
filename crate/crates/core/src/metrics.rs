//! Per-tick metrics rows and their sinks.
//!
//! The CSV file starts with a version comment line, then [`HEADER`], then
//! one row per (tick, UE, direction). Reals carry three decimals; the
//! latency column is empty for ticks in which no packet was released.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use crossbeam_channel::{bounded, Sender};

use crate::types::{Direction, UeId};

pub const FORMAT_VERSION: u32 = 1;
pub const VERSION_LINE: &str = "# ranemu-metrics v1";
pub const HEADER: &str = "time_ms,ue_id,direction,granted_bits,released_bits,dropped_bits,buffer_bits,sinr_db,mcs,cqi,ri,mean_packet_latency_ms,pos_x,pos_y";
/// Rows are flushed to disk every this many emulated milliseconds.
pub const FLUSH_INTERVAL_MS: u64 = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub time_ms: u64,
    pub ue_id: UeId,
    pub direction: Direction,
    pub granted_bits: u64,
    pub released_bits: u64,
    pub dropped_bits: u64,
    pub buffer_bits: u64,
    pub sinr_db: f64,
    pub mcs: u8,
    pub cqi: u8,
    pub ri: u8,
    pub mean_packet_latency_ms: Option<f64>,
    pub pos_x: f64,
    pub pos_y: f64,
}

impl MetricsRow {
    pub fn to_csv(&self, out: &mut String) {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{:.3},{},{},{},",
            self.time_ms,
            self.ue_id,
            self.direction,
            self.granted_bits,
            self.released_bits,
            self.dropped_bits,
            self.buffer_bits,
            self.sinr_db,
            self.mcs,
            self.cqi,
            self.ri
        );
        if let Some(l) = self.mean_packet_latency_ms {
            let _ = write!(out, "{l:.3}");
        }
        let _ = writeln!(out, ",{:.3},{:.3}", self.pos_x, self.pos_y);
    }
}

pub trait MetricsSink: Send {
    /// Rows of one tick.
    fn write_rows(&mut self, rows: &[MetricsRow]) -> io::Result<()>;
    /// Flush everything and release the sink.
    fn finish(&mut self) -> io::Result<()>;
}

/// Discards everything.
#[derive(Debug, Default)]
pub struct NullSink;

impl MetricsSink for NullSink {
    fn write_rows(&mut self, _rows: &[MetricsRow]) -> io::Result<()> {
        Ok(())
    }

    fn finish(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// Keeps rows in memory; clones share the storage.
#[derive(Debug, Clone, Default)]
pub struct MemorySink {
    rows: Arc<Mutex<Vec<MetricsRow>>>,
}

impl MemorySink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self) -> Vec<MetricsRow> {
        self.rows.lock().expect("sink poisoned").clone()
    }
}

impl MetricsSink for MemorySink {
    fn write_rows(&mut self, rows: &[MetricsRow]) -> io::Result<()> {
        self.rows.lock().expect("sink poisoned").extend_from_slice(rows);
        Ok(())
    }

    fn finish(&mut self) -> io::Result<()> {
        Ok(())
    }
}

enum Batch {
    Text { time_ms: u64, text: String },
    Done,
}

/// CSV file written from a background thread.
pub struct CsvSink {
    tx: Option<Sender<Batch>>,
    failure: Arc<Mutex<Option<io::Error>>>,
    worker: Option<JoinHandle<io::Result<()>>>,
}

impl CsvSink {
    /// Create the file and write the version and header lines.
    pub fn create(path: &Path) -> io::Result<Self> {
        let file = File::create(path)?;
        Self::from_writer(BufWriter::with_capacity(1 << 20, file))
    }

    pub fn from_writer<W: Write + Send + 'static>(mut out: W) -> io::Result<Self> {
        writeln!(out, "{VERSION_LINE}")?;
        writeln!(out, "{HEADER}")?;
        out.flush()?;
        // bounded so a stalled disk eventually applies back-pressure
        let (tx, rx) = bounded::<Batch>(4096);
        let failure = Arc::new(Mutex::new(None));
        let slot = Arc::clone(&failure);
        let worker = std::thread::Builder::new()
            .name("metrics-writer".into())
            .spawn(move || {
                let mut next_flush = FLUSH_INTERVAL_MS;
                let run = || -> io::Result<()> {
                    for batch in rx {
                        match batch {
                            Batch::Text { time_ms, text } => {
                                out.write_all(text.as_bytes())?;
                                if time_ms + 1 >= next_flush {
                                    out.flush()?;
                                    next_flush = (time_ms + 1) / FLUSH_INTERVAL_MS * FLUSH_INTERVAL_MS + FLUSH_INTERVAL_MS;
                                }
                            }
                            Batch::Done => break,
                        }
                    }
                    out.flush()
                };
                let r = run();
                if let Err(e) = &r {
                    *slot.lock().expect("slot poisoned") = Some(io::Error::new(e.kind(), e.to_string()));
                }
                r
            })?;
        Ok(Self {
            tx: Some(tx),
            failure,
            worker: Some(worker),
        })
    }

    fn take_failure(&self) -> Option<io::Error> {
        self.failure.lock().expect("slot poisoned").take()
    }
}

impl MetricsSink for CsvSink {
    fn write_rows(&mut self, rows: &[MetricsRow]) -> io::Result<()> {
        if let Some(e) = self.take_failure() {
            return Err(e);
        }
        let Some(first) = rows.first() else {
            return Ok(());
        };
        let mut text = String::with_capacity(rows.len() * 64);
        for r in rows {
            r.to_csv(&mut text);
        }
        let tx = self.tx.as_ref().ok_or_else(|| io::Error::other("sink finished"))?;
        tx.send(Batch::Text { time_ms: first.time_ms, text }).map_err(|_| {
            self.take_failure()
                .unwrap_or_else(|| io::Error::other("metrics writer stopped"))
        })
    }

    fn finish(&mut self) -> io::Result<()> {
        if let Some(tx) = self.tx.take() {
            let _ = tx.send(Batch::Done);
        }
        match self.worker.take() {
            Some(w) => w.join().map_err(|_| io::Error::other("metrics writer panicked"))?,
            None => Ok(()),
        }
    }
}

impl Drop for CsvSink {
    fn drop(&mut self) {
        let _ = self.finish();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: u64, latency: Option<f64>) -> MetricsRow {
        MetricsRow {
            time_ms: t,
            ue_id: UeId(3),
            direction: Direction::Ul,
            granted_bits: 1234,
            released_bits: 12_000,
            dropped_bits: 0,
            buffer_bits: 5,
            sinr_db: 12.34567,
            mcs: 17,
            cqi: 10,
            ri: 2,
            mean_packet_latency_ms: latency,
            pos_x: -1.0,
            pos_y: 2.0 / 3.0,
        }
    }

    #[test]
    fn fixed_precision_format() {
        let mut s = String::new();
        row(7, Some(4.0)).to_csv(&mut s);
        assert_eq!(s, "7,3,UL,1234,12000,0,5,12.346,17,10,2,4.000,-1.000,0.667\n");
        s.clear();
        row(8, None).to_csv(&mut s);
        assert_eq!(s, "8,3,UL,1234,12000,0,5,12.346,17,10,2,,-1.000,0.667\n");
        assert_eq!(s.trim_end().split(',').count(), HEADER.split(',').count());
    }

    #[test]
    fn header_written_once() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut sink = CsvSink::create(&path).unwrap();
        for t in 0..250 {
            sink.write_rows(&[row(t, None), row(t, Some(1.0))]).unwrap();
        }
        sink.finish().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], VERSION_LINE);
        assert_eq!(lines.iter().filter(|l| **l == HEADER).count(), 1);
        assert_eq!(lines.len(), 2 + 500);
    }

    #[test]
    fn unwritable_path_fails_at_create() {
        let dir = tempfile::tempdir().unwrap();
        assert!(CsvSink::create(&dir.path().join("missing/m.csv")).is_err());
    }

    /// Accepts the two header lines, then fails.
    struct Failing(usize);

    impl Write for Failing {
        fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
            if self.0 >= 2 {
                return Err(io::Error::other("disk full"));
            }
            self.0 += buf.iter().filter(|b| **b == b'\n').count();
            Ok(buf.len())
        }

        fn flush(&mut self) -> io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn write_errors_surface() {
        let mut sink = CsvSink::from_writer(Failing(0)).unwrap();
        let mut failed = false;
        for t in 0..1000 {
            if sink.write_rows(&[row(t, None)]).is_err() {
                failed = true;
                break;
            }
            std::thread::sleep(std::time::Duration::from_micros(50));
        }
        assert!(failed || sink.finish().is_err());
    }

    #[test]
    fn million_rows_fast() {
        let mut sink = CsvSink::from_writer(io::sink()).unwrap();
        let start = std::time::Instant::now();
        let batch: Vec<MetricsRow> = (0..100).map(|_| row(0, Some(2.5))).collect();
        for t in 0..10_000u64 {
            let mut b = batch.clone();
            for r in &mut b {
                r.time_ms = t;
            }
            sink.write_rows(&b).unwrap();
        }
        sink.finish().unwrap();
        assert!(start.elapsed().as_secs_f64() < 20.0);
    }
}
