//! Transport-block size per resource block group.

use crate::config::SUBCARRIERS_PER_PRB;

/// Inputs of the per-RB size formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TbsParams {
    pub layers: u8,
    pub modulation_order: u8,
    pub scaling_factor: f64,
    pub code_rate: f64,
    pub symbols: u8,
    pub overhead: f64,
    pub rbs_per_rbg: u32,
}

// Absorbs binary rounding of decimal inputs such as 0.86 or 0.5 that are
// exact integers in real arithmetic.
const FLOOR_SLACK: f64 = 1e-9;

/// `floor(v Q_m f R 12 B (1 - OH)) * rbs_per_rbg`.
pub fn tbs_bits(p: &TbsParams) -> u64 {
    let per_rb = f64::from(p.layers)
        * f64::from(p.modulation_order)
        * p.scaling_factor
        * p.code_rate
        * f64::from(SUBCARRIERS_PER_PRB)
        * f64::from(p.symbols)
        * (1.0 - p.overhead);
    if per_rb <= 0.0 {
        return 0;
    }
    (per_rb + FLOOR_SLACK).floor() as u64 * u64::from(p.rbs_per_rbg)
}
