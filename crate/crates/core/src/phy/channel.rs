//! Per-UE channel state and CSI refresh.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::config::{CsiMode, ScenarioKind};
use crate::mac::amc::Amc;
use crate::rng::SimRng;
use crate::types::{distance, Position};

use super::budget::LinkBudget;
use super::pathloss::{pathloss_db, shadow_decorrelation_m, shadow_sigma_db, LinkGeometry};
use super::rank::RankTable;
use super::{db_to_linear, linear_to_db, SPEED_OF_LIGHT};

/// Clarke-model coherence-time constant.
pub const COHERENCE_CONSTANT: f64 = 0.423;
pub const MIN_CORRELATION_MS: f64 = 1.0;
pub const MAX_CORRELATION_MS: f64 = 1000.0;

/// Coherence time `0.423 / f_d` with `f_d = v f / c`, clamped to
/// `[1, 1000]` ms.
pub fn correlation_time_ms(speed_mps: f64, frequency_hz: f64) -> f64 {
    let doppler_hz = speed_mps * frequency_hz / SPEED_OF_LIGHT;
    if doppler_hz <= 0.0 {
        return MAX_CORRELATION_MS;
    }
    (1000.0 * COHERENCE_CONSTANT / doppler_hz).clamp(MIN_CORRELATION_MS, MAX_CORRELATION_MS)
}

/// Channel-state information of one UE in one direction, valid until
/// `next_refresh_ms`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    /// One value in wideband mode, one per sub-band otherwise.
    pub sinr_db: Vec<f64>,
    /// Sub-band width in PRBs; `None` in wideband mode.
    pub subband_size: Option<u32>,
    pub wideband_sinr_db: f64,
    pub rsrp_dbm: f64,
    pub cqi_index: u8,
    /// MCS per entry of `sinr_db`, chosen on the per-layer SINR.
    pub mcs: Vec<u8>,
    pub wideband_mcs: u8,
    pub rank_indicator: u8,
    pub next_refresh_ms: f64,
    pub correlation_time_ms: f64,
}

impl ChannelState {
    fn subband_of(&self, prb: u32) -> usize {
        match self.subband_size {
            Some(size) => ((prb / size) as usize).min(self.sinr_db.len() - 1),
            None => 0,
        }
    }

    pub fn mcs_for_prb(&self, prb: u32) -> u8 {
        self.mcs[self.subband_of(prb)]
    }

    pub fn sinr_for_prb(&self, prb: u32) -> f64 {
        self.sinr_db[self.subband_of(prb)]
    }

    /// SINR seen by each spatial layer, the value the MCS was chosen on.
    pub fn layer_sinr_for_prb(&self, prb: u32) -> f64 {
        self.sinr_for_prb(prb) - 10.0 * f64::from(self.rank_indicator).log10()
    }
}

/// Number of CSI sub-bands for a grid.
pub fn subband_count(prb_count: u32, mode: CsiMode) -> usize {
    match mode {
        CsiMode::Wideband => 1,
        CsiMode::Subband { subband_size } => prb_count.div_ceil(subband_size) as usize,
    }
}

/// Everything that turns received power into CSI, for one direction.
#[derive(Debug, Clone, Copy)]
pub struct CsiContext<'a> {
    pub amc: &'a Amc,
    pub rank: &'a RankTable,
    pub csi_mode: CsiMode,
    pub prb_count: u32,
    pub max_layers: u8,
}

/// SINR, MCS, CQI and RI from per-sub-band received powers.
pub fn derive_csi(
    rsp_dbm: &[f64],
    budget: &LinkBudget,
    ctx: &CsiContext<'_>,
    now_ms: f64,
    correlation_time_ms: f64,
) -> ChannelState {
    let sinr_db: Vec<f64> = rsp_dbm.iter().map(|&p| budget.sinr_db(p)).collect();
    let wideband_sinr_db = if sinr_db.len() == 1 {
        sinr_db[0]
    } else {
        linear_to_db(sinr_db.iter().map(|&s| db_to_linear(s)).sum::<f64>() / sinr_db.len() as f64)
    };
    let wideband_rsp = if rsp_dbm.len() == 1 {
        rsp_dbm[0]
    } else {
        linear_to_db(rsp_dbm.iter().map(|&p| db_to_linear(p)).sum::<f64>() / rsp_dbm.len() as f64)
    };
    let rank_indicator = ctx.rank.rank_lookup(wideband_sinr_db, ctx.max_layers);
    let layer_penalty = 10.0 * f64::from(rank_indicator).log10();
    let mcs = sinr_db
        .iter()
        .map(|&s| ctx.amc.select_mcs(s - layer_penalty))
        .collect();
    let wideband_mcs = ctx.amc.select_mcs(wideband_sinr_db - layer_penalty);
    let subband_size = match ctx.csi_mode {
        CsiMode::Wideband => None,
        CsiMode::Subband { subband_size } => Some(subband_size),
    };
    ChannelState {
        sinr_db,
        subband_size,
        wideband_sinr_db,
        rsrp_dbm: wideband_rsp - linear_to_db(12.0 * f64::from(ctx.prb_count)),
        cqi_index: ctx.amc.cqi(wideband_mcs),
        mcs,
        wideband_mcs,
        rank_indicator,
        next_refresh_ms: now_ms + correlation_time_ms,
        correlation_time_ms,
    }
}

/// Spatially correlated log-normal shadowing (exponential autocorrelation).
#[derive(Debug, Clone)]
pub struct Shadowing {
    sigma_db: f64,
    decorrelation_m: f64,
    value_db: f64,
    anchor: Position,
    rng: SimRng,
}

impl Shadowing {
    pub fn new(scenario: ScenarioKind, los: bool, enabled: bool, at: Position, mut rng: SimRng) -> Self {
        let sigma_db = if enabled { shadow_sigma_db(scenario, los) } else { 0.0 };
        let z: f64 = StandardNormal.sample(&mut rng);
        Self {
            sigma_db,
            decorrelation_m: shadow_decorrelation_m(scenario, los),
            value_db: sigma_db * z,
            anchor: at,
            rng,
        }
    }

    /// Move to `at` and return the shadowing loss there.
    pub fn update(&mut self, at: &Position) -> f64 {
        if self.sigma_db == 0.0 {
            return 0.0;
        }
        let moved = distance(&self.anchor, at);
        if moved > 0.0 {
            let rho = (-moved / self.decorrelation_m).exp();
            let z: f64 = StandardNormal.sample(&mut self.rng);
            self.value_db = rho * self.value_db + (1.0 - rho * rho).sqrt() * self.sigma_db * z;
            self.anchor = *at;
        }
        self.value_db
    }

    pub fn value_db(&self) -> f64 {
        self.value_db
    }
}

/// Rayleigh fading power in dB: `10 log10(h)`, `h ~ Exp(1)`.
pub fn rayleigh_fading_db<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let h: f64 = Exp1.sample(rng);
    linear_to_db(h)
}

/// Channel of one UE in one direction.
#[derive(Debug, Clone)]
pub struct UeChannel {
    pub budget: LinkBudget,
    pub scenario: ScenarioKind,
    pub los: bool,
    pub frequency_hz: f64,
    pub fading_enabled: bool,
    fading_rng: SimRng,
    state: Option<ChannelState>,
}

impl UeChannel {
    pub fn new(
        budget: LinkBudget,
        scenario: ScenarioKind,
        los: bool,
        frequency_hz: f64,
        fading_enabled: bool,
        fading_rng: SimRng,
    ) -> Self {
        Self {
            budget,
            scenario,
            los,
            frequency_hz,
            fading_enabled,
            fading_rng,
            state: None,
        }
    }

    pub fn state(&self) -> Option<&ChannelState> {
        self.state.as_ref()
    }

    pub fn needs_refresh(&self, now_ms: f64) -> bool {
        self.state.as_ref().is_none_or(|s| now_ms >= s.next_refresh_ms)
    }

    /// Recompute the CSI at the given geometry. Fading is redrawn
    /// independently per sub-band.
    pub fn csi_report(
        &mut self,
        now_ms: f64,
        gnb: &Position,
        ue: &Position,
        shadow_db: f64,
        speed_mps: f64,
        ctx: &CsiContext<'_>,
    ) -> &ChannelState {
        let geometry = LinkGeometry::between(gnb, ue);
        let pl = pathloss_db(self.scenario, &geometry, self.frequency_hz, self.los);
        let mean = self.budget.mean_rsp_dbm(pl) - shadow_db;
        let n = subband_count(ctx.prb_count, ctx.csi_mode);
        let rsp: Vec<f64> = (0..n)
            .map(|_| {
                if self.fading_enabled {
                    mean + rayleigh_fading_db(&mut self.fading_rng)
                } else {
                    mean
                }
            })
            .collect();
        let tc = correlation_time_ms(speed_mps, self.frequency_hz);
        self.state = Some(derive_csi(&rsp, &self.budget, ctx, now_ms, tc));
        self.state.as_ref().expect("just set")
    }
}
