//! Deterministic seed splitting.
//!
//! A master seed is expanded into independent substream seeds by folding a
//! path of integers through SplitMix64:
//!
//! ```text
//! s0 = master
//! s(i+1) = splitmix64(s(i) ^ splitmix64(part(i) + GOLDEN))
//! ```
//!
//! The harness uses the following paths (`rep` = replication index):
//!
//! | stream            | path                                   |
//! |-------------------|----------------------------------------|
//! | service catalog   | `[CATALOG, rep]`                       |
//! | demand slots      | `[DEMAND, rep]`                        |
//! | sampler, slot `t` | `[SAMPLER, rep, scheme, sweep_idx, t]` |
//!
//! Catalog and demand streams do not depend on the scheme or the sweep
//! point, so every scheme sees the same demand within a replication.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const CATALOG: u64 = 1;
pub const DEMAND: u64 = 2;
pub const SAMPLER: u64 = 3;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn substream(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(master, |s, &p| splitmix64(s ^ splitmix64(p.wrapping_add(GOLDEN))))
}

pub fn rng_for(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream(master, path))
}
