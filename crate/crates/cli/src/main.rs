use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use log::{error, info, warn};
use ranemu_core::config::RunMode;
use ranemu_core::{load_scenario, Direction, Engine, Error, RunSummary};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Realtime,
    Fast,
}

/// Run a 5G RAN emulation scenario.
#[derive(Debug, Parser)]
#[command(name = "ranemu", version)]
struct Args {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the scenario duration.
    #[arg(long)]
    duration_ms: Option<u64>,
    /// Override the run mode.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Override the RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write per-tick metrics to this file.
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    #[arg(long, default_value = "info")]
    log_level: log::LevelFilter,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn print_summary(out: &mut impl Write, s: &RunSummary) -> io::Result<()> {
    writeln!(
        out,
        "ticks {}  wall {:.3} s  mean tick {:.4} ms  deadline misses {}",
        s.ticks,
        s.wall_time.as_secs_f64(),
        s.mean_tick_period_ms(),
        s.deadline_misses
    )?;
    if s.fail_open_releases > 0 {
        writeln!(out, "released {} held packets at shutdown", s.fail_open_releases)?;
    }
    writeln!(out, "{:>6} {:>3} {:>14} {:>12} {:>8}", "ue", "dir", "thr_mbps", "lat_ms", "loss")?;
    for u in &s.ues {
        for d in Direction::ALL {
            let t = u.dir(d);
            let lat = t
                .mean_latency_ms()
                .map_or_else(|| "-".to_string(), |l| format!("{l:.3}"));
            writeln!(
                out,
                "{:>6} {:>3} {:>14.3} {:>12} {:>8.4}",
                u.ue_id.0,
                d.as_str(),
                t.throughput_bps(s.duration_ms) / 1e6,
                lat,
                t.loss_rate()
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_CONFIG),
            };
        }
    };
    env_logger::Builder::new().filter_level(args.log_level).init();

    let mut cfg = match load_scenario(&args.config) {
        Ok(c) => c,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(d) = args.duration_ms {
        cfg.duration_ms = d;
    }
    if let Some(m) = args.mode {
        cfg.run_mode = match m {
            Mode::Realtime => RunMode::RealTime,
            Mode::Fast => RunMode::FastForward,
        };
    }
    if let Some(s) = args.seed {
        cfg.rng_seed = s;
    }
    if let Some(p) = args.metrics_out {
        cfg.metrics_path = Some(p);
    }

    info!(
        "{} UEs, {} ms, {:?}, seed {}",
        cfg.ue_list.len(),
        cfg.duration_ms,
        cfg.run_mode,
        cfg.rng_seed
    );
    let result = Engine::new(cfg).and_then(Engine::run);
    match result {
        Ok(s) => {
            if s.deadline_misses > 0 {
                warn!("{} tick deadlines missed", s.deadline_misses);
            }
            // a closed stdout is not a failed run
            let _ = print_summary(&mut io::stdout().lock(), &s);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(EXIT_CONFIG),
                _ => ExitCode::from(EXIT_RUNTIME),
            }
        }
    }
}
