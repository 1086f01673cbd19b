//! Scenario description: parsing, defaults and validation.
//!
//! A scenario is a single TOML document. Every tunable constant of the
//! emulator lives here; the rest of the crate only ever sees a validated
//! [`ScenarioConfig`]. See `docs/scenario.md` at the repository root for the
//! full key reference.
//!
//! Loading fills every optional key with its resolved default (noise power,
//! overheads, gNB position, table paths), so a loaded config serializes to a
//! document that loads back to an identical value.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::ConfigError;
use crate::types::{Position, UeId};

pub const SCHEMA_VERSION: u32 = 1;

/// Fraction of the channel bandwidth assumed lost to guard bands when the
/// PRB count is derived rather than given.
pub const DEFAULT_GUARD_FRACTION: f64 = 0.02;
pub const DEFAULT_JITTER_STD_FRACTION: f64 = 0.05;
pub const DEFAULT_BUFFER_CAPACITY_BITS: u64 = 3_000_000;
pub const SUBCARRIERS_PER_PRB: u32 = 12;

/// Priority ladder for the named levels accepted by `priority_weight`.
pub const PRIORITY_NONE: f64 = 1.0;
pub const PRIORITY_MEDIUM: f64 = 2.0;
pub const PRIORITY_HIGH: f64 = 4.0;
pub const PRIORITY_MAX: f64 = 8.0;

const FR2_START_HZ: f64 = 24.25e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RunMode {
    #[serde(rename = "realtime")]
    RealTime,
    #[default]
    #[serde(rename = "fast")]
    FastForward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub duration_ms: u64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub run_mode: RunMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics_path: Option<PathBuf>,
    pub carrier: CarrierConfig,
    #[serde(default)]
    pub duplex: Duplex,
    #[serde(default)]
    pub scheduler: SchedulerConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub harq: HarqConfig,
    #[serde(default)]
    pub mobility: MobilityConfig,
    #[serde(default, rename = "ue")]
    pub ue_list: Vec<UeConfig>,
    /// Compact description of many similar UEs; expanded into `ue` at load.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ue_group: Vec<UeGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarrierConfig {
    pub frequency_hz: f64,
    pub dl_bandwidth_hz: f64,
    pub ul_bandwidth_hz: f64,
    #[serde(default = "default_numerology")]
    pub numerology: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prb_count_override: Option<u32>,
    #[serde(default = "default_guard_fraction")]
    pub guard_fraction: f64,
    #[serde(default = "default_true")]
    pub rbg_grouping: bool,
    /// Independent parallel grids whose grants add up per UE.
    #[serde(default = "default_one")]
    pub component_carriers: u32,
}

impl CarrierConfig {
    pub fn bandwidth_hz(&self, dir: crate::Direction) -> f64 {
        match dir {
            crate::Direction::Dl => self.dl_bandwidth_hz,
            crate::Direction::Ul => self.ul_bandwidth_hz,
        }
    }

    pub fn subcarrier_spacing_hz(&self) -> f64 {
        subcarrier_spacing_hz(self.numerology)
    }

    pub fn slots_per_tick(&self) -> u32 {
        1 << self.numerology
    }

    pub fn slot_duration_ms(&self) -> f64 {
        1.0 / f64::from(self.slots_per_tick())
    }

    pub fn prb_count(&self, dir: crate::Direction) -> u32 {
        derive_prb_count_with_guard(
            self.bandwidth_hz(dir),
            self.numerology,
            self.prb_count_override,
            self.guard_fraction,
        )
        .expect("validated at load")
    }

    pub fn is_fr2(&self) -> bool {
        self.frequency_hz >= FR2_START_HZ
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum Duplex {
    #[default]
    Fdd,
    /// Slot-direction pattern over 'D' and 'U', cycled by absolute slot index.
    Tdd { pattern: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerMetric {
    Fifo,
    #[default]
    Pf,
    Bet,
    Mt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum CsiMode {
    #[default]
    Wideband,
    Subband { subband_size: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerConfig {
    #[serde(default)]
    pub metric: SchedulerMetric,
    #[serde(default = "default_ema_alpha")]
    pub ema_alpha: f64,
    #[serde(default)]
    pub csi: CsiMode,
    /// Scaling factor f of the bits-per-RB formula.
    #[serde(default = "default_scaling_factor")]
    pub scaling_factor: f64,
    /// Overhead OH per direction. Defaults depend on the frequency range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dl_overhead: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ul_overhead: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mcs_table_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cqi_map_path: Option<PathBuf>,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            metric: SchedulerMetric::default(),
            ema_alpha: default_ema_alpha(),
            csi: CsiMode::default(),
            scaling_factor: default_scaling_factor(),
            dl_overhead: None,
            ul_overhead: None,
            mcs_table_path: None,
            cqi_map_path: None,
        }
    }
}

impl SchedulerConfig {
    pub fn overhead(&self, dir: crate::Direction) -> f64 {
        match dir {
            crate::Direction::Dl => self.dl_overhead,
            crate::Direction::Ul => self.ul_overhead,
        }
        .expect("resolved at load")
    }
}

/// Pathloss scenario family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    /// Urban macro.
    #[default]
    Uma,
    /// Urban micro, street canyon.
    Umi,
    /// Indoor hotspot, office.
    Inh,
}

impl ScenarioKind {
    /// Default gNB antenna height in metres.
    pub fn default_bs_height_m(self) -> f64 {
        match self {
            ScenarioKind::Uma => 25.0,
            ScenarioKind::Umi => 10.0,
            ScenarioKind::Inh => 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfererConfig {
    pub position: Position,
    pub power_dbm: f64,
    pub frequency_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default)]
    pub scenario: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gnb_position: Option<Position>,
    /// gNB transmit power (downlink).
    #[serde(default = "default_gnb_power")]
    pub tx_power_dbm: f64,
    /// UE transmit power (uplink).
    #[serde(default = "default_ue_power")]
    pub ue_tx_power_dbm: f64,
    #[serde(default)]
    pub antenna_gain_tx_dbi: f64,
    #[serde(default)]
    pub antenna_gain_rx_dbi: f64,
    /// Total noise power over the channel bandwidth. When absent it is
    /// resolved to thermal noise plus `noise_figure_db`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dl_noise_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ul_noise_dbm: Option<f64>,
    #[serde(default = "default_noise_figure")]
    pub noise_figure_db: f64,
    #[serde(default = "default_true")]
    pub shadowing: bool,
    #[serde(default = "default_true")]
    pub fading: bool,
    #[serde(default)]
    pub interferers: Vec<InterfererConfig>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioKind::default(),
            gnb_position: None,
            tx_power_dbm: default_gnb_power(),
            ue_tx_power_dbm: default_ue_power(),
            antenna_gain_tx_dbi: 0.0,
            antenna_gain_rx_dbi: 0.0,
            dl_noise_dbm: None,
            ul_noise_dbm: None,
            noise_figure_db: default_noise_figure(),
            shadowing: true,
            fading: true,
            interferers: Vec::new(),
        }
    }
}

impl ChannelConfig {
    pub fn gnb_position(&self) -> Position {
        self.gnb_position.expect("resolved at load")
    }

    pub fn noise_dbm(&self, dir: crate::Direction) -> f64 {
        match dir {
            crate::Direction::Dl => self.dl_noise_dbm,
            crate::Direction::Ul => self.ul_noise_dbm,
        }
        .expect("resolved at load")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarqConfig {
    /// HARQ error reduction factor r.
    #[serde(default = "default_r")]
    pub error_reduction_factor: f64,
    #[serde(default = "default_max_retx")]
    pub max_retransmissions: u32,
    #[serde(default = "default_harq_rtt")]
    pub harq_rtt_slots: u32,
    #[serde(default = "default_processing_delay")]
    pub processing_delay_ms: f64,
    #[serde(default = "default_bler_target")]
    pub bler_target: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bler_table_path: Option<PathBuf>,
}

impl Default for HarqConfig {
    fn default() -> Self {
        Self {
            error_reduction_factor: default_r(),
            max_retransmissions: default_max_retx(),
            harq_rtt_slots: default_harq_rtt(),
            processing_delay_ms: default_processing_delay(),
            bler_target: default_bler_target(),
            bler_table_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilityConfig {
    #[serde(default = "default_bounds_min")]
    pub bounds_min: [f64; 2],
    #[serde(default = "default_bounds_max")]
    pub bounds_max: [f64; 2],
    #[serde(default = "default_walk_sigma")]
    pub random_walk_sigma_deg: f64,
    #[serde(default = "default_arrival_tolerance")]
    pub waypoint_tolerance_m: f64,
    /// Probability of each of the left and right turns at an intersection.
    #[serde(default = "default_turn_probability")]
    pub manhattan_turn_probability: f64,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        Self {
            bounds_min: default_bounds_min(),
            bounds_max: default_bounds_max(),
            random_walk_sigma_deg: default_walk_sigma(),
            waypoint_tolerance_m: default_arrival_tolerance(),
            manhattan_turn_probability: default_turn_probability(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrafficConfig {
    Simulated {
        dl_bps: f64,
        ul_bps: f64,
        packet_size_bits: u64,
        #[serde(default = "default_jitter")]
        jitter_std_fraction: f64,
    },
    Captured {
        dl_queue: u16,
        ul_queue: u16,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MobilityModel {
    #[default]
    Static,
    RandomWalk {
        speed_mps: f64,
    },
    Waypoint {
        targets: Vec<Position>,
        speed_mps: f64,
    },
    Manhattan {
        grid_step_m: f64,
        speed_mps: f64,
    },
}

impl MobilityModel {
    pub fn speed_mps(&self) -> f64 {
        match self {
            MobilityModel::Static => 0.0,
            MobilityModel::RandomWalk { speed_mps }
            | MobilityModel::Waypoint { speed_mps, .. }
            | MobilityModel::Manhattan { speed_mps, .. } => *speed_mps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeConfig {
    pub id: UeId,
    pub traffic: TrafficConfig,
    #[serde(default)]
    pub mobility: MobilityModel,
    pub position: Position,
    #[serde(default = "default_priority", deserialize_with = "deserialize_priority")]
    pub priority_weight: f64,
    #[serde(default = "default_layers")]
    pub max_mimo_layers: u8,
    #[serde(default = "default_true")]
    pub los: bool,
    #[serde(default = "default_buffer_capacity")]
    pub buffer_capacity_bits: u64,
}

/// Placement rule for a [`UeGroup`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Placement {
    /// Evenly spaced on a circle around the gNB.
    Ring { radius_m: f64, height_m: f64 },
    /// Evenly spaced on a segment, endpoints included.
    Line { from: Position, to: Position },
    /// Deterministic golden-angle spiral filling an annulus.
    Annulus {
        min_radius_m: f64,
        max_radius_m: f64,
        height_m: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeGroup {
    pub count: u32,
    pub first_id: u32,
    pub placement: Placement,
    pub traffic: TrafficConfig,
    #[serde(default)]
    pub mobility: MobilityModel,
    #[serde(default = "default_priority", deserialize_with = "deserialize_priority")]
    pub priority_weight: f64,
    #[serde(default = "default_layers")]
    pub max_mimo_layers: u8,
    #[serde(default = "default_true")]
    pub los: bool,
    #[serde(default = "default_buffer_capacity")]
    pub buffer_capacity_bits: u64,
}

impl UeGroup {
    fn expand(&self, gnb: Position) -> Vec<UeConfig> {
        let n = self.count as usize;
        (0..n)
            .map(|i| {
                let position = match &self.placement {
                    Placement::Ring { radius_m, height_m } => {
                        let a = std::f64::consts::TAU * i as f64 / n as f64;
                        [gnb[0] + radius_m * a.cos(), gnb[1] + radius_m * a.sin(), *height_m]
                    }
                    Placement::Line { from, to } => {
                        let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
                        [
                            from[0] + t * (to[0] - from[0]),
                            from[1] + t * (to[1] - from[1]),
                            from[2] + t * (to[2] - from[2]),
                        ]
                    }
                    Placement::Annulus {
                        min_radius_m,
                        max_radius_m,
                        height_m,
                    } => {
                        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                        let u = (i as f64 + 0.5) / n as f64;
                        let r2 = min_radius_m.powi(2) + u * (max_radius_m.powi(2) - min_radius_m.powi(2));
                        let r = r2.sqrt();
                        let a = golden * i as f64;
                        [gnb[0] + r * a.cos(), gnb[1] + r * a.sin(), *height_m]
                    }
                };
                UeConfig {
                    id: UeId(self.first_id + i as u32),
                    traffic: self.traffic.clone(),
                    mobility: self.mobility.clone(),
                    position,
                    priority_weight: self.priority_weight,
                    max_mimo_layers: self.max_mimo_layers,
                    los: self.los,
                    buffer_capacity_bits: self.buffer_capacity_bits,
                }
            })
            .collect()
    }
}

fn deserialize_priority<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Weight(f64),
        Level(String),
    }
    match Raw::deserialize(d)? {
        Raw::Weight(w) => Ok(w),
        Raw::Level(level) => priority_level(&level)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown priority level `{level}`"))),
    }
}

/// Weight for a named priority level.
pub fn priority_level(name: &str) -> Option<f64> {
    match name {
        "none" => Some(PRIORITY_NONE),
        "medium" => Some(PRIORITY_MEDIUM),
        "high" => Some(PRIORITY_HIGH),
        "max" => Some(PRIORITY_MAX),
        _ => None,
    }
}

fn default_true() -> bool {
    true
}
fn default_one() -> u32 {
    1
}
fn default_numerology() -> u8 {
    1
}
fn default_guard_fraction() -> f64 {
    DEFAULT_GUARD_FRACTION
}
fn default_ema_alpha() -> f64 {
    0.01
}
fn default_scaling_factor() -> f64 {
    1.0
}
fn default_gnb_power() -> f64 {
    46.0
}
fn default_ue_power() -> f64 {
    23.0
}
fn default_noise_figure() -> f64 {
    7.0
}
fn default_r() -> f64 {
    0.5
}
fn default_max_retx() -> u32 {
    4
}
fn default_harq_rtt() -> u32 {
    8
}
fn default_processing_delay() -> f64 {
    3.0
}
fn default_bler_target() -> f64 {
    0.1
}
fn default_bounds_min() -> [f64; 2] {
    [-5000.0, -5000.0]
}
fn default_bounds_max() -> [f64; 2] {
    [5000.0, 5000.0]
}
fn default_walk_sigma() -> f64 {
    5.0
}
fn default_arrival_tolerance() -> f64 {
    0.5
}
fn default_turn_probability() -> f64 {
    0.25
}
fn default_jitter() -> f64 {
    DEFAULT_JITTER_STD_FRACTION
}
fn default_priority() -> f64 {
    PRIORITY_NONE
}
fn default_layers() -> u8 {
    1
}
fn default_buffer_capacity() -> u64 {
    DEFAULT_BUFFER_CAPACITY_BITS
}

pub fn subcarrier_spacing_hz(numerology: u8) -> f64 {
    15e3 * f64::from(1u32 << numerology)
}

/// PRB count for a channel with the default guard fraction.
pub fn derive_prb_count(
    bandwidth_hz: f64,
    numerology: u8,
    prb_count_override: Option<u32>,
) -> Result<u32, ConfigError> {
    derive_prb_count_with_guard(bandwidth_hz, numerology, prb_count_override, DEFAULT_GUARD_FRACTION)
}

/// PRB count: the override when present, else
/// `floor(bandwidth * (1 - guard) / (12 * scs))`.
pub fn derive_prb_count_with_guard(
    bandwidth_hz: f64,
    numerology: u8,
    prb_count_override: Option<u32>,
    guard_fraction: f64,
) -> Result<u32, ConfigError> {
    if !(bandwidth_hz.is_finite() && bandwidth_hz > 0.0) {
        return Err(ConfigError::invalid("bandwidth_hz", "must be positive"));
    }
    let prbs = match prb_count_override {
        Some(n) => n,
        None => {
            let per_prb = f64::from(SUBCARRIERS_PER_PRB) * subcarrier_spacing_hz(numerology);
            (bandwidth_hz * (1.0 - guard_fraction) / per_prb).floor() as u32
        }
    };
    if prbs == 0 {
        return Err(ConfigError::invalid(
            "bandwidth_hz",
            format!("zero PRBs at numerology {numerology}"),
        ));
    }
    Ok(prbs)
}

/// Thermal noise over `bandwidth_hz` plus a receiver noise figure.
pub fn thermal_noise_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    -174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

/// Read, default and validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Missing {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    ScenarioConfig::from_toml_str(&text, base).map_err(|e| match e {
        ConfigError::Parse { message, .. } => ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

impl ScenarioConfig {
    /// Parse a scenario from TOML text. Relative table paths resolve
    /// against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: ScenarioConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::from("<string>"),
            message: e.to_string(),
        })?;
        cfg.apply_defaults(base_dir)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    fn apply_defaults(&mut self, base_dir: &Path) -> Result<(), ConfigError> {
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(path) = p.as_mut() {
                if path.is_relative() {
                    *path = base_dir.join(&*path);
                }
            }
        };
        resolve(&mut self.harq.bler_table_path);
        resolve(&mut self.scheduler.mcs_table_path);
        resolve(&mut self.scheduler.cqi_map_path);

        let fr2 = self.carrier.is_fr2();
        self.scheduler
            .dl_overhead
            .get_or_insert(if fr2 { 0.18 } else { 0.14 });
        self.scheduler
            .ul_overhead
            .get_or_insert(if fr2 { 0.10 } else { 0.08 });

        let ch = &mut self.channel;
        ch.gnb_position
            .get_or_insert([0.0, 0.0, ch.scenario.default_bs_height_m()]);
        let nf = ch.noise_figure_db;
        ch.dl_noise_dbm
            .get_or_insert_with(|| thermal_noise_dbm(self.carrier.dl_bandwidth_hz, nf));
        ch.ul_noise_dbm
            .get_or_insert_with(|| thermal_noise_dbm(self.carrier.ul_bandwidth_hz, nf));

        let gnb = ch.gnb_position.expect("just set");
        for group in std::mem::take(&mut self.ue_group) {
            self.ue_list.extend(group.expand(gnb));
        }
        Ok(())
    }

    /// Check every invariant. Returns the first violation found.
    pub fn validate(&self) -> Result<(), ConfigError> {
        use ConfigError as E;
        if self.schema_version != SCHEMA_VERSION {
            return Err(E::invalid(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if self.duration_ms < 1 {
            return Err(E::invalid("duration_ms", "must be at least 1"));
        }

        let c = &self.carrier;
        positive("carrier.frequency_hz", c.frequency_hz)?;
        positive("carrier.dl_bandwidth_hz", c.dl_bandwidth_hz)?;
        positive("carrier.ul_bandwidth_hz", c.ul_bandwidth_hz)?;
        if c.numerology > 4 {
            return Err(E::invalid("carrier.numerology", "must be in 0..=4"));
        }
        if !(0.0..1.0).contains(&c.guard_fraction) {
            return Err(E::invalid("carrier.guard_fraction", "must be in [0, 1)"));
        }
        if c.prb_count_override == Some(0) {
            return Err(E::invalid("carrier.prb_count_override", "zero PRBs"));
        }
        for (key, bw) in [
            ("carrier.dl_bandwidth_hz", c.dl_bandwidth_hz),
            ("carrier.ul_bandwidth_hz", c.ul_bandwidth_hz),
        ] {
            derive_prb_count_with_guard(bw, c.numerology, c.prb_count_override, c.guard_fraction)
                .map_err(|e| match e {
                    E::Invalid { reason, .. } => E::invalid(key, reason),
                    other => other,
                })?;
        }
        if c.component_carriers == 0 {
            return Err(E::invalid("carrier.component_carriers", "must be at least 1"));
        }

        if let Duplex::Tdd { pattern } = &self.duplex {
            if pattern.is_empty() {
                return Err(E::invalid("duplex.pattern", "TDD pattern is empty"));
            }
            if let Some(bad) = pattern.chars().find(|ch| *ch != 'D' && *ch != 'U') {
                return Err(E::invalid(
                    "duplex.pattern",
                    format!("invalid slot symbol '{bad}', expected 'D' or 'U'"),
                ));
            }
        }

        let s = &self.scheduler;
        if !(s.ema_alpha > 0.0 && s.ema_alpha <= 1.0) {
            return Err(E::invalid("scheduler.ema_alpha", "must be in (0, 1]"));
        }
        if !(s.scaling_factor > 0.0 && s.scaling_factor <= 1.0) {
            return Err(E::invalid("scheduler.scaling_factor", "must be in (0, 1]"));
        }
        for (key, oh) in [
            ("scheduler.dl_overhead", s.dl_overhead),
            ("scheduler.ul_overhead", s.ul_overhead),
        ] {
            if let Some(oh) = oh {
                if !(0.0..1.0).contains(&oh) {
                    return Err(E::invalid(key, "must be in [0, 1)"));
                }
            }
        }
        if let CsiMode::Subband { subband_size } = s.csi {
            if subband_size == 0 {
                return Err(E::invalid("scheduler.csi.subband_size", "must be at least 1"));
            }
        }

        let ch = &self.channel;
        finite("channel.tx_power_dbm", ch.tx_power_dbm)?;
        finite("channel.ue_tx_power_dbm", ch.ue_tx_power_dbm)?;
        finite("channel.antenna_gain_tx_dbi", ch.antenna_gain_tx_dbi)?;
        finite("channel.antenna_gain_rx_dbi", ch.antenna_gain_rx_dbi)?;
        finite("channel.noise_figure_db", ch.noise_figure_db)?;
        if let Some(n) = ch.dl_noise_dbm {
            finite("channel.dl_noise_dbm", n)?;
        }
        if let Some(n) = ch.ul_noise_dbm {
            finite("channel.ul_noise_dbm", n)?;
        }
        if let Some(p) = ch.gnb_position {
            finite_position("channel.gnb_position", &p)?;
        }
        for (i, intf) in ch.interferers.iter().enumerate() {
            finite_position(&format!("channel.interferers[{i}].position"), &intf.position)?;
            finite(&format!("channel.interferers[{i}].power_dbm"), intf.power_dbm)?;
            positive(&format!("channel.interferers[{i}].frequency_hz"), intf.frequency_hz)?;
        }

        let h = &self.harq;
        if !(0.0..=1.0).contains(&h.error_reduction_factor) {
            return Err(E::invalid("harq.error_reduction_factor", "must be in [0, 1]"));
        }
        if !(h.bler_target > 0.0 && h.bler_target < 1.0) {
            return Err(E::invalid("harq.bler_target", "must be in (0, 1)"));
        }
        if h.max_retransmissions == 0 {
            return Err(E::invalid("harq.max_retransmissions", "must be at least 1"));
        }
        if h.harq_rtt_slots == 0 {
            return Err(E::invalid("harq.harq_rtt_slots", "must be at least 1"));
        }
        if !(h.processing_delay_ms.is_finite() && h.processing_delay_ms >= 0.0) {
            return Err(E::invalid("harq.processing_delay_ms", "must be non-negative"));
        }

        let m = &self.mobility;
        if !(m.bounds_min[0] < m.bounds_max[0] && m.bounds_min[1] < m.bounds_max[1]) {
            return Err(E::invalid("mobility.bounds_min", "must be below bounds_max"));
        }
        if !(m.random_walk_sigma_deg.is_finite() && m.random_walk_sigma_deg >= 0.0) {
            return Err(E::invalid("mobility.random_walk_sigma_deg", "must be non-negative"));
        }
        positive("mobility.waypoint_tolerance_m", m.waypoint_tolerance_m)?;
        if !(0.0..=0.5).contains(&m.manhattan_turn_probability) {
            return Err(E::invalid("mobility.manhattan_turn_probability", "must be in [0, 0.5]"));
        }

        let mut ids = HashSet::new();
        let mut queues = HashSet::new();
        for (i, ue) in self.ue_list.iter().enumerate() {
            let key = |field: &str| format!("ue[{i}].{field}");
            if !ids.insert(ue.id) {
                return Err(E::invalid(key("id"), format!("duplicate UE id {}", ue.id)));
            }
            if !(ue.priority_weight.is_finite() && ue.priority_weight > 0.0) {
                return Err(E::invalid(key("priority_weight"), "must be positive"));
            }
            if !(1..=4).contains(&ue.max_mimo_layers) {
                return Err(E::invalid(key("max_mimo_layers"), "must be in 1..=4"));
            }
            if ue.buffer_capacity_bits == 0 {
                return Err(E::invalid(key("buffer_capacity_bits"), "must be positive"));
            }
            finite_position(&key("position"), &ue.position)?;
            match &ue.traffic {
                TrafficConfig::Simulated {
                    dl_bps,
                    ul_bps,
                    packet_size_bits,
                    jitter_std_fraction,
                } => {
                    non_negative(&key("traffic.dl_bps"), *dl_bps)?;
                    non_negative(&key("traffic.ul_bps"), *ul_bps)?;
                    non_negative(&key("traffic.jitter_std_fraction"), *jitter_std_fraction)?;
                    if *packet_size_bits == 0 {
                        return Err(E::invalid(key("traffic.packet_size_bits"), "must be positive"));
                    }
                }
                TrafficConfig::Captured { dl_queue, ul_queue } => {
                    if self.run_mode != RunMode::RealTime {
                        return Err(E::invalid(
                            key("traffic"),
                            "captured traffic requires run_mode = \"realtime\"",
                        ));
                    }
                    for (field, q) in [("traffic.dl_queue", dl_queue), ("traffic.ul_queue", ul_queue)] {
                        if !queues.insert(*q) {
                            return Err(E::invalid(key(field), format!("queue {q} already in use")));
                        }
                    }
                }
            }
            match &ue.mobility {
                MobilityModel::Static => {}
                MobilityModel::RandomWalk { speed_mps } => {
                    non_negative(&key("mobility.speed_mps"), *speed_mps)?
                }
                MobilityModel::Waypoint { targets, speed_mps } => {
                    non_negative(&key("mobility.speed_mps"), *speed_mps)?;
                    if targets.is_empty() {
                        return Err(E::invalid(key("mobility.targets"), "needs at least one target"));
                    }
                    for t in targets {
                        finite_position(&key("mobility.targets"), t)?;
                    }
                }
                MobilityModel::Manhattan {
                    grid_step_m,
                    speed_mps,
                } => {
                    non_negative(&key("mobility.speed_mps"), *speed_mps)?;
                    positive(&key("mobility.grid_step_m"), *grid_step_m)?;
                }
            }
        }
        Ok(())
    }

    pub fn ue(&self, id: UeId) -> Option<&UeConfig> {
        self.ue_list.iter().find(|u| u.id == id)
    }
}

fn finite(key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(key, "must be finite"))
    }
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::invalid(key, "must be positive"))
    }
}

fn non_negative(key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(ConfigError::invalid(key, "must be non-negative"))
    }
}

fn finite_position(key: &str, p: &Position) -> Result<(), ConfigError> {
    if p.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(ConfigError::invalid(key, "coordinates must be finite"))
    }
}
