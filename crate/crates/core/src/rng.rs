//! Deterministic random-number streams.
//!
//! Every stochastic stage draws from a ChaCha12 generator keyed by
//! `(scenario seed, stage, item)`. Per-phone stages key the item by phone
//! id, so results are independent of iteration order and a parallel
//! implementation would produce bit-identical output.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Stage label for the network-synthesis pass.
pub const STREAM_NETWORK: u64 = 1;
/// Stage label for per-phone earthquake trigger draws.
pub const STREAM_EVENT: u64 = 2;
/// Stage label for per-phone false-positive processes.
pub const STREAM_FALSE_POSITIVE: u64 = 3;

/// SplitMix64 finalizer; full-avalanche 64-bit mix.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for one `(seed, stage, item)` substream.
pub fn substream(seed: u64, stage: u64, item: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(mix64(seed ^ mix64(stage ^ mix64(item))))
}
