//! Counter-style random streams: a stream is identified by `(seed, key)` and
//! each chunk of work gets its own ChaCha stream index, so results never
//! depend on how chunks are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Number of Monte Carlo replicates handled by one chunk.
pub const CHUNK: usize = 256;

/// SplitMix64 finalizer, used to derive independent seeds from tuples.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a seed for a named sub-experiment.
pub fn derive_seed(seed: u64, key: u64) -> u64 {
    mix64(seed ^ mix64(key))
}

/// Generator for chunk `chunk` of the stream keyed by `(seed, key)`.
pub fn chunk_rng(seed: u64, key: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, key));
    rng.set_stream(chunk);
    rng
}

/// Number of chunks covering `m` replicates.
pub fn chunk_count(m: usize) -> usize {
    m.div_ceil(CHUNK)
}

/// Replicate index range of chunk `c`.
pub fn chunk_range(c: usize, m: usize) -> std::ops::Range<usize> {
    let start = c * CHUNK;
    start..((c + 1) * CHUNK).min(m)
}
