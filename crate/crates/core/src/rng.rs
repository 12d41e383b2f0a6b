//! Seeded uniform index sampling shared by the stochastic solvers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform sampler over `{0, …, n−1}` driven by ChaCha8.
///
/// The sequence of drawn indices is a pure function of `(seed, stream, n)` and
/// is part of the reproducibility contract; [`SampleStream::with_log`] records it.
#[derive(Debug, Clone)]
pub struct SampleStream {
    rng: ChaCha8Rng,
    seed: u64,
    n: usize,
    log: Option<Vec<usize>>,
}

impl SampleStream {
    pub fn new(seed: u64, stream: u64, n: usize) -> Self {
        assert!(n > 0, "cannot sample from an empty index set");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            rng,
            seed,
            n,
            log: None,
        }
    }

    /// Independent stream with the same seed.
    pub fn split(&self, stream: u64) -> Self {
        Self::new(self.seed, stream, self.n)
    }

    pub fn with_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    #[inline]
    pub fn next_index(&mut self) -> usize {
        let i = self.rng.random_range(0..self.n);
        if let Some(log) = &mut self.log {
            log.push(i);
        }
        i
    }

    pub fn logged(&self) -> Option<&[usize]> {
        self.log.as_deref()
    }

    pub fn into_log(self) -> Option<Vec<usize>> {
        self.log
    }
}
