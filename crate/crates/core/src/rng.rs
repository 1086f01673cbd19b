//! Seeded per-UE random streams.
//!
//! Every stochastic component owns its own generator derived from the
//! scenario seed, the UE id and a stream tag, so adding a UE or disabling a
//! model never perturbs the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::types::UeId;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    TrafficDl = 1,
    TrafficUl = 2,
    Mobility = 3,
    Shadowing = 4,
    FadingDl = 5,
    FadingUl = 6,
    HarqDl = 7,
    HarqUl = 8,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream_rng(seed: u64, ue: UeId, stream: Stream) -> SimRng {
    let key = splitmix64(seed ^ splitmix64(u64::from(ue.0) << 8 | stream as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(stream as u64);
    rng
}
