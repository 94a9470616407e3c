//! Seeded random numbers.
//!
//! The generator is ChaCha8 (`rand_chacha`), keyed from the 64-bit seed via
//! `SeedableRng::seed_from_u64`. ChaCha output is defined by its algorithm,
//! not by the platform, so a seed yields the same stream everywhere. Floats
//! and indices are derived here rather than through `rand`'s distributions,
//! which keeps the mapping from raw words to values fixed:
//!
//! * `next_f64` takes the top 53 bits of one word: `(w >> 11) · 2⁻⁵³ ∈ [0, 1)`.
//! * `below(n)` uses rejection sampling on whole words (no modulo bias).

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// An independent stream keyed by `(self.seed, stream)`.
    pub fn derive(&self, stream: u64) -> Rng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(stream.wrapping_add(1));
        Rng {
            seed: self.seed,
            inner,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`.
    ///
    /// # Panics
    ///
    /// If `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let w = self.next_u64();
            if w < zone {
                return (w % n) as usize;
            }
        }
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Fisher–Yates, last index first.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// A tensor of i.i.d. draws from `[lo, hi)`.
    pub fn uniform(&mut self, shape: &[usize], lo: f64, hi: f64) -> Result<Tensor> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Argument(format!(
                "uniform bounds need lo < hi, got [{lo}, {hi})"
            )));
        }
        let mut t = Tensor::new(shape, vec![0.0; shape.iter().product()])?;
        let width = hi - lo;
        for x in t.data_mut() {
            *x = lo + width * self.next_f64();
        }
        Ok(t)
    }
}

/// Free-function form of [`Rng::uniform`].
pub fn rand_uniform(rng: &mut Rng, shape: &[usize], lo: f64, hi: f64) -> Result<Tensor> {
    rng.uniform(shape, lo, hi)
}
