//! Seeded, counter-mode random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha20 stream keyed
//! by `(seed, domain)` and positioned by a 64-bit stream index:
//!
//! * key bytes `0..8`   = `seed` (little endian)
//! * key bytes `8..16`  = the [`Domain`] tag (little endian)
//! * key bytes `16..32` = the constant `b"lwejscc-stream\0\0"`
//! * ChaCha stream id   = `index`
//!
//! Distinct domains or indices therefore never share keystream, and the
//! output is identical on every platform. Gaussian draws go through
//! `rand_distr`'s ziggurat with the pure-Rust `libm`, so they are
//! bit-reproducible too.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type Stream = ChaCha20Rng;

/// Purpose tag mixed into the stream key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    /// Secret matrix `S` and masking matrix `U`.
    Secret = 1,
    /// Uniform public lattice `A`.
    Lattice = 2,
    /// Per-message error triples; index = message index.
    Errors = 3,
    /// Bob's channel noise; index = message index.
    Channel = 4,
    /// Synthetic images; index = image number.
    Data = 5,
    /// Network parameter initialisation.
    Init = 6,
    /// IND-CPA challenger; index = trial.
    Game = 7,
    /// Adversary's own randomness; index = trial.
    Adversary = 8,
    /// Mini-batch shuffling; index = epoch.
    Shuffle = 9,
    /// Eavesdropper channel noise; index = message index.
    EveChannel = 10,
}

const KEY_TAG: &[u8; 16] = b"lwejscc-stream\0\0";

pub fn stream(seed: u64, domain: Domain, index: u64) -> Stream {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    key[16..].copy_from_slice(KEY_TAG);
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
