//! Reproducible per-replication random streams.
//!
//! Every replication gets its own ChaCha8 stream, keyed by the master seed,
//! a small label path (experiment, horizon index, lane, ...) and the
//! replication index. The mapping never depends on scheduling, so results
//! are identical for any number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Label namespaces, so unrelated consumers never share a stream.
pub mod domain {
    pub const THINNING: u64 = 1;
    pub const CLUSTER: u64 = 2;
    pub const COUPLED: u64 = 3;
    pub const DEBIAS: u64 = 4;
    pub const BOOTSTRAP: u64 = 5;
    pub const RATES: u64 = 6;
    pub const VERIFY: u64 = 7;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a label path into a 64-bit key.
pub fn derive_key(master_seed: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(master_seed), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

/// Stream `index` under the key `(master_seed, labels)`.
pub fn stream(master_seed: u64, labels: &[u64], index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_key(master_seed, labels));
    rng.set_stream(index);
    rng
}
