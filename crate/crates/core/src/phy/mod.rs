//! Channel-quality estimation: pathloss, shadowing, fading, SINR and the
//! derived CSI quantities (MCS, CQI, rank).

pub mod bler;
pub mod budget;
pub mod channel;
pub mod pathloss;
pub mod rank;

pub use bler::BlerTable;
pub use budget::{interference_dbm, received_power_dbm, sinr_db, LinkBudget};
pub use channel::{correlation_time_ms, ChannelState, UeChannel};
pub use pathloss::{pathloss_db, LinkGeometry};
pub use rank::RankTable;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub(crate) fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub(crate) fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}
