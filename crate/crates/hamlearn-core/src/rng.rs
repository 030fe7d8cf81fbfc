//! Counter-based random streams.
//!
//! Every random draw in the library descends from a single top-level `u64`
//! seed. Independent units of work (one measurement record, one Monte-Carlo
//! shot, one sampled verification state) each get their own ChaCha stream so
//! results are bit-identical regardless of thread count or execution order.
//!
//! Stream-splitting rule: the 64-bit stream id is `(domain << 56) | index`,
//! where `domain` tags the consumer and `index` is the record / shot / trial
//! counter within that domain.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    DatasetRecord = 1,
    McShot = 2,
    TrialState = 3,
    Panel = 4,
    Plan = 5,
}

/// Substream for one unit of work under `seed`.
pub fn substream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    debug_assert!(index < (1 << 56));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 56) | index);
    rng
}
