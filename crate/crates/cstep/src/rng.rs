//! Seeded RNG construction and substream derivation.
//!
//! Determinism contract used throughout the crate: any operation that fans
//! out into independent random pieces (trajectories, episodes, grid cells)
//! derives one ChaCha substream per piece, keyed by the piece index, and
//! reduces results in index order. Serial and parallel execution therefore
//! produce identical output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Root generator for a seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent substream `stream` of the generator family keyed by `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
