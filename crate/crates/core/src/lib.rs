//! Real-time radio-access-network emulation core.
//!
//! The emulator carries simulated or captured IP packets through an abstract
//! 5G NR stack once per millisecond: traffic ingress, scheduling requests,
//! channel-state refresh, resource-grid allocation, segmentation into
//! transport blocks, HARQ outcome evaluation and in-order packet release.
//!
//! The entry point is [`engine::Engine`], built from a validated
//! [`config::ScenarioConfig`].

pub mod config;
pub mod engine;
pub mod error;
pub mod mac;
pub mod metrics;
pub mod mobility;
pub mod phy;
pub mod rng;
pub mod traffic;
pub mod types;
pub mod ue;

pub use config::{load_scenario, ScenarioConfig};
pub use engine::{Engine, RunSummary};
pub use error::{ConfigError, Error};
pub use types::{Direction, UeId};
