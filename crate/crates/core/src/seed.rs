//! Seed fan-out.
//!
//! A run carries one global seed. Each module derives its own sub-seed as
//! `global ^ MODULE_CONSTANT`, so re-running a single module with the same
//! global seed reproduces exactly what the full pipeline produced for it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic, platform-independent generator used everywhere.
pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Split,
    Captioner,
    Encoder,
    Topics,
    Tsne,
    Forest,
    Synthetic,
}

impl Stream {
    pub const fn constant(self) -> u64 {
        match self {
            Stream::Split => 0x5b1d_0000_0000_0001,
            Stream::Captioner => 0xca97_0000_0000_0002,
            Stream::Encoder => 0xe9c0_0000_0000_0003,
            Stream::Topics => 0x7091_0000_0000_0004,
            Stream::Tsne => 0x75e0_0000_0000_0005,
            Stream::Forest => 0xf0e5_0000_0000_0006,
            Stream::Synthetic => 0x5e7e_0000_0000_0007,
        }
    }
}

pub fn sub_seed(global: u64, stream: Stream) -> u64 {
    global ^ stream.constant()
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream_rng(global: u64, stream: Stream) -> Rng {
    rng(sub_seed(global, stream))
}
