//! MCS index table and MCS-to-CQI map.
//!
//! Both ship as CSV files under `data/` and can be replaced from the
//! scenario. `mcs_table.csv` columns: `mcs,modulation_order,code_rate_x1024`.
//! `cqi_map.csv` columns: `mcs,cqi`. Lines starting with `#` are comments.

use std::fs;
use std::path::Path;

use crate::error::ConfigError;

const BUNDLED_MCS: &str = include_str!("../../data/mcs_table.csv");
const BUNDLED_CQI: &str = include_str!("../../data/cqi_map.csv");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McsEntry {
    /// Modulation order Q_m (bits per symbol).
    pub modulation_order: u8,
    /// Code rate R in (0, 1).
    pub code_rate: f64,
}

impl McsEntry {
    pub fn spectral_efficiency(&self) -> f64 {
        f64::from(self.modulation_order) * self.code_rate
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McsTable {
    entries: Vec<McsEntry>,
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn read_table(path: &Path) -> Result<String, ConfigError> {
    fs::read_to_string(path).map_err(|e| ConfigError::Table {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

impl McsTable {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_MCS).expect("bundled MCS table is valid")
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&read_table(path)?).map_err(|reason| ConfigError::Table {
            path: path.display().to_string(),
            reason,
        })
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut entries = Vec::new();
        for (lineno, line) in data_lines(text).skip(1) {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || format!("line {lineno}: expected `mcs,modulation_order,code_rate_x1024`");
            if f.len() != 3 {
                return Err(bad());
            }
            let mcs: usize = f[0].parse().map_err(|_| bad())?;
            let qm: u8 = f[1].parse().map_err(|_| bad())?;
            let rate: f64 = f[2].parse().map_err(|_| bad())?;
            if mcs != entries.len() {
                return Err(format!("line {lineno}: MCS indices must be consecutive from 0"));
            }
            if !(1..=10).contains(&qm) || !(rate > 0.0 && rate < 1024.0) {
                return Err(format!("line {lineno}: modulation order or code rate out of range"));
            }
            entries.push(McsEntry {
                modulation_order: qm,
                code_rate: rate / 1024.0,
            });
        }
        if entries.is_empty() {
            return Err("no MCS entries".into());
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_index(&self) -> u8 {
        (self.entries.len() - 1) as u8
    }

    pub fn entry(&self, mcs: u8) -> McsEntry {
        self.entries[usize::from(mcs).min(self.entries.len() - 1)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CqiMap {
    cqi: Vec<u8>,
}

impl CqiMap {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_CQI).expect("bundled CQI map is valid")
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&read_table(path)?).map_err(|reason| ConfigError::Table {
            path: path.display().to_string(),
            reason,
        })
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cqi = Vec::new();
        for (lineno, line) in data_lines(text).skip(1) {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = || format!("line {lineno}: expected `mcs,cqi`");
            if f.len() != 2 {
                return Err(bad());
            }
            let mcs: usize = f[0].parse().map_err(|_| bad())?;
            let value: u8 = f[1].parse().map_err(|_| bad())?;
            if mcs != cqi.len() {
                return Err(format!("line {lineno}: MCS indices must be consecutive from 0"));
            }
            if value > 15 {
                return Err(format!("line {lineno}: CQI {value} above 15"));
            }
            cqi.push(value);
        }
        if cqi.is_empty() {
            return Err("no CQI entries".into());
        }
        Ok(Self { cqi })
    }

    pub fn cqi(&self, mcs: u8) -> u8 {
        self.cqi[usize::from(mcs).min(self.cqi.len() - 1)]
    }
}
