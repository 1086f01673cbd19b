//! Adaptive modulation and coding.

use crate::config::ScenarioConfig;
use crate::error::ConfigError;
use crate::phy::{BlerTable, ChannelState};

use super::mcs::{CqiMap, McsEntry, McsTable};

#[derive(Debug, Clone)]
pub struct Amc {
    pub mcs_table: McsTable,
    pub cqi_map: CqiMap,
    pub bler: BlerTable,
    pub bler_target: f64,
}

impl Amc {
    pub fn new(mcs_table: McsTable, cqi_map: CqiMap, bler: BlerTable, bler_target: f64) -> Self {
        Self {
            mcs_table,
            cqi_map,
            bler,
            bler_target,
        }
    }

    /// Bundled tables with the default logistic BLER curves.
    pub fn bundled(bler_target: f64) -> Self {
        let mcs_table = McsTable::bundled();
        let bler = BlerTable::default_logistic(mcs_table.len());
        Self::new(mcs_table, CqiMap::bundled(), bler, bler_target)
    }

    pub fn from_config(cfg: &ScenarioConfig) -> Result<Self, ConfigError> {
        let mcs_table = match &cfg.scheduler.mcs_table_path {
            Some(p) => McsTable::load(p)?,
            None => McsTable::bundled(),
        };
        let cqi_map = match &cfg.scheduler.cqi_map_path {
            Some(p) => CqiMap::load(p)?,
            None => CqiMap::bundled(),
        };
        let bler = match &cfg.harq.bler_table_path {
            Some(p) => BlerTable::load(p)?,
            None => BlerTable::default_logistic(mcs_table.len()),
        };
        Ok(Self::new(mcs_table, cqi_map, bler, cfg.harq.bler_target))
    }

    /// Highest MCS meeting the BLER target at `sinr_db`, 0 below the table.
    pub fn select_mcs(&self, sinr_db: f64) -> u8 {
        self.bler
            .highest_mcs_within(sinr_db, self.bler_target, self.mcs_table.len())
    }

    pub fn entry(&self, mcs: u8) -> McsEntry {
        self.mcs_table.entry(mcs)
    }

    pub fn cqi(&self, mcs: u8) -> u8 {
        self.cqi_map.cqi(mcs)
    }

    /// MCS, modulation order and code rate for the sub-band covering `prb`.
    pub fn amc_select(&self, csi: &ChannelState, prb: u32) -> (u8, u8, f64) {
        let mcs = csi.mcs_for_prb(prb);
        let e = self.entry(mcs);
        (mcs, e.modulation_order, e.code_rate)
    }
}
