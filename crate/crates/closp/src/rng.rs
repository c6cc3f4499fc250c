use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Independent randomness domains. Every command derives all of its random
/// state from one 64-bit seed; giving each concern its own stream keeps, for
/// example, the corpus identical whether or not a probe runs afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Generate = 1,
    Split = 2,
    Init = 3,
    Batch = 4,
    Probe = 5,
    Baseline = 6,
}

pub fn substream(seed: u64, stream: Stream) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
