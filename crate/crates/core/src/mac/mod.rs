//! Medium-access control: resource grid, scheduling metrics, allocation,
//! link adaptation and transport-block sizing.

pub mod allocate;
pub mod amc;
pub mod grid;
pub mod mcs;
pub mod metric;
pub mod tbs;

pub use allocate::{allocate, AllocParams, Candidate, TbsGrant};
pub use amc::Amc;
pub use grid::{build_grid, rbg_size, tdd_symbols, ResourceGrid, SlotTag};
pub use mcs::{CqiMap, McsEntry, McsTable};
pub use metric::{compute_metric, SchedulerState, UeMetricView};
pub use tbs::{tbs_bits, TbsParams};
