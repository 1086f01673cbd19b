//! SINR to block-error-rate curves, one per MCS.
//!
//! Tables are either loaded from a text file or generated from a logistic
//! default. File format: `#` comments, a `mcs,sinr_db,bler` header, then one
//! record per line. Points of one MCS may come in any order; after sorting
//! by SINR the BLER must be non-increasing. Between points the curve is
//! linear in dB, outside them it holds the end values.

use std::fs;
use std::path::Path;

use crate::error::ConfigError;

/// Midpoint (BLER = 0.5) of MCS 0 for the default curves.
pub const DEFAULT_MCS0_MIDPOINT_DB: f64 = -6.0;
/// Midpoint spacing between consecutive MCS indices.
pub const DEFAULT_MIDPOINT_STEP_DB: f64 = 1.9;
/// Logistic slope, per dB.
pub const DEFAULT_SLOPE_PER_DB: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
enum Curve {
    Logistic { midpoint_db: f64, slope: f64 },
    Sampled { sinr_db: Vec<f64>, bler: Vec<f64> },
}

impl Curve {
    fn eval(&self, sinr_db: f64) -> f64 {
        match self {
            Curve::Logistic { midpoint_db, slope } => {
                if sinr_db.is_nan() {
                    return 1.0;
                }
                1.0 / (1.0 + (slope * (sinr_db - midpoint_db)).exp())
            }
            Curve::Sampled { sinr_db: xs, bler: ys } => {
                // NaN lands here too
                if sinr_db.is_nan() || sinr_db <= xs[0] {
                    return ys[0];
                }
                let last = xs.len() - 1;
                if sinr_db >= xs[last] {
                    return ys[last];
                }
                let hi = xs.partition_point(|x| *x <= sinr_db);
                let lo = hi - 1;
                let t = (sinr_db - xs[lo]) / (xs[hi] - xs[lo]);
                ys[lo] + t * (ys[hi] - ys[lo])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlerTable {
    curves: Vec<Curve>,
}

impl BlerTable {
    /// Logistic curves `1 / (1 + exp(k (sinr - mid(m))))` for `mcs_count`
    /// indices.
    pub fn default_logistic(mcs_count: usize) -> Self {
        let curves = (0..mcs_count)
            .map(|m| Curve::Logistic {
                midpoint_db: DEFAULT_MCS0_MIDPOINT_DB + DEFAULT_MIDPOINT_STEP_DB * m as f64,
                slope: DEFAULT_SLOPE_PER_DB,
            })
            .collect();
        Self { curves }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Table {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text).map_err(|reason| ConfigError::Table {
            path: path.display().to_string(),
            reason,
        })
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut points: Vec<Vec<(f64, f64)>> = Vec::new();
        let mut header_seen = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                if line.replace(' ', "") != "mcs,sinr_db,bler" {
                    return Err(format!("line {}: expected header `mcs,sinr_db,bler`", lineno + 1));
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(format!("line {}: expected 3 fields", lineno + 1));
            }
            let bad = |what: &str| format!("line {}: bad {what}", lineno + 1);
            let mcs: usize = fields[0].parse().map_err(|_| bad("mcs"))?;
            let sinr: f64 = fields[1].parse().map_err(|_| bad("sinr_db"))?;
            let bler: f64 = fields[2].parse().map_err(|_| bad("bler"))?;
            if !sinr.is_finite() {
                return Err(bad("sinr_db"));
            }
            if !(0.0..=1.0).contains(&bler) {
                return Err(format!("line {}: bler {bler} outside [0, 1]", lineno + 1));
            }
            if points.len() <= mcs {
                points.resize(mcs + 1, Vec::new());
            }
            points[mcs].push((sinr, bler));
        }
        if points.is_empty() {
            return Err("no records".into());
        }
        let mut curves = Vec::with_capacity(points.len());
        for (mcs, mut pts) in points.into_iter().enumerate() {
            if pts.is_empty() {
                return Err(format!("mcs {mcs} has no points"));
            }
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in pts.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(format!("mcs {mcs}: duplicate sinr {}", w[0].0));
                }
                if w[1].1 > w[0].1 {
                    return Err(format!(
                        "mcs {mcs}: bler increases from {} to {} between {} dB and {} dB",
                        w[0].1, w[1].1, w[0].0, w[1].0
                    ));
                }
            }
            let (sinr_db, bler) = pts.into_iter().unzip();
            curves.push(Curve::Sampled { sinr_db, bler });
        }
        Ok(Self { curves })
    }

    pub fn mcs_count(&self) -> usize {
        self.curves.len()
    }

    /// BLER of `mcs` at `sinr_db`. Indices beyond the table use the last curve.
    pub fn bler(&self, mcs: u8, sinr_db: f64) -> f64 {
        let idx = usize::from(mcs).min(self.curves.len() - 1);
        self.curves[idx].eval(sinr_db)
    }

    /// Highest MCS whose BLER at `sinr_db` does not exceed `target`;
    /// MCS 0 when none qualifies.
    pub fn highest_mcs_within(&self, sinr_db: f64, target: f64, mcs_limit: usize) -> u8 {
        let n = self.curves.len().min(mcs_limit);
        (0..n)
            .rev()
            .find(|&m| self.curves[m].eval(sinr_db) <= target)
            .unwrap_or(0) as u8
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logistic_limits_and_monotonicity() {
        let t = BlerTable::default_logistic(28);
        for m in 0..28u8 {
            assert!(t.bler(m, -1e3) > 1.0 - 1e-12);
            assert!(t.bler(m, 1e3) < 1e-12);
            assert_eq!(t.bler(m, f64::NEG_INFINITY), 1.0);
            assert_eq!(t.bler(m, f64::INFINITY), 0.0);
            let mut prev = 1.0;
            let mut s = -30.0;
            while s < 80.0 {
                let b = t.bler(m, s);
                assert!(b <= prev);
                prev = b;
                s += 0.25;
            }
        }
        let mid = DEFAULT_MCS0_MIDPOINT_DB + DEFAULT_MIDPOINT_STEP_DB * 5.0;
        assert!((t.bler(5, mid) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn loads_sampled_table_and_interpolates() {
        let text = "# test\nmcs,sinr_db,bler\n0,0.0,1.0\n0,10.0,0.0\n1,5.0,1.0\n1,15.0,0.0\n";
        let t = BlerTable::parse(text).unwrap();
        assert_eq!(t.mcs_count(), 2);
        assert!((t.bler(0, 2.5) - 0.75).abs() < 1e-12);
        assert_eq!(t.bler(0, -5.0), 1.0);
        assert_eq!(t.bler(1, 20.0), 0.0);
        assert_eq!(t.highest_mcs_within(12.0, 0.5, 28), 1);
        assert_eq!(t.highest_mcs_within(4.0, 0.5, 28), 0);
    }

    #[test]
    fn rejects_non_monotone_curve() {
        let text = "mcs,sinr_db,bler\n0,0.0,0.9\n0,5.0,0.95\n";
        let err = BlerTable::parse(text).unwrap_err();
        assert!(err.contains("increases"), "{err}");
    }

    #[test]
    fn rejects_malformed_records() {
        assert!(BlerTable::parse("mcs,sinr_db,bler\n0,1.0\n").is_err());
        assert!(BlerTable::parse("mcs,sinr_db,bler\n0,1.0,1.5\n").is_err());
        assert!(BlerTable::parse("sinr,bler\n").is_err());
        assert!(BlerTable::parse("mcs,sinr_db,bler\n1,1.0,0.5\n").is_err());
    }
}
