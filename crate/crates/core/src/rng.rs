//! Counter-based seeding.
//!
//! Every Monte Carlo loop is split into fixed-size chunks. Chunk `c` draws
//! from ChaCha8 stream `c` of the run seed, so results do not depend on the
//! number of worker threads, and a run with `2n` draws reproduces the first
//! `n` draws of a run with `n` draws exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Draws per chunk.
pub const CHUNK: usize = 512;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives an independent seed for a named sub-stage of an experiment.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let tag_hash = tag.bytes().fold(0xCBF2_9CE4_8422_2325_u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x100_0000_01B3)
    });
    splitmix64(seed ^ splitmix64(tag_hash))
}

pub fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Runs `work(rng, start, len)` over `count` draws split into chunks and
/// returns the per-chunk results in chunk order.
pub fn par_chunks<T, F>(count: usize, seed: u64, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize, usize) -> T + Sync,
{
    let chunks = count.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let len = CHUNK.min(count - start);
            let mut rng = chunk_rng(seed, c);
            work(&mut rng, start, len)
        })
        .collect()
}
