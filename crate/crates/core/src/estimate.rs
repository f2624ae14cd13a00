//! Monte Carlo estimates and the deterministic parallel driver.
//!
//! Concurrency contract: sample work is split into fixed-size chunks, chunk
//! `i` draws from `stream.substream(i)`, and chunk outputs are reduced in
//! chunk-index order with compensated summation. Results are therefore
//! bit-identical for every worker count, which the acceptance suite checks.

use crate::rng::RngStream;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Point estimate with a standard error, sample count and the stream label
/// that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl Estimate {
    /// Symmetric confidence interval `value ± z * stderr`.
    pub fn ci(&self, z: f64) -> (f64, f64) {
        (self.value - z * self.stderr, self.value + z * self.stderr)
    }
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.c += (self.sum - t) + x;
        } else {
            self.c += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.c
    }
}

/// Compensated sums of a statistic and its square, for mean/stderr reductions.
#[derive(Debug, Clone, Default)]
pub struct MeanAcc {
    pub n: u64,
    sum: Kahan,
    sum_sq: Kahan,
}

impl MeanAcc {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum.add(x);
        self.sum_sq.add(x * x);
    }

    pub fn merge(&mut self, other: &MeanAcc) {
        self.n += other.n;
        self.sum.add(other.sum.value());
        self.sum_sq.add(other.sum_sq.value());
    }

    pub fn sum(&self) -> f64 {
        self.sum.value()
    }

    pub fn mean(&self) -> f64 {
        self.sum.value() / self.n as f64
    }

    /// Sample variance of the statistic (unbiased).
    pub fn variance(&self) -> f64 {
        let n = self.n as f64;
        let m = self.mean();
        ((self.sum_sq.value() / n - m * m) * n / (n - 1.0)).max(0.0)
    }

    /// Estimate of the mean with its standard error.
    pub fn estimate(&self, seed: u64) -> Estimate {
        Estimate {
            value: self.mean(),
            stderr: (self.variance() / self.n as f64).sqrt(),
            n_samples: self.n,
            seed,
        }
    }
}

/// Fixed chunk size of the deterministic driver.
pub const MC_CHUNK: u64 = 4096;

/// Run `per_chunk` over all sample chunks in parallel and return the outputs
/// in chunk-index order. `per_chunk(chunk_idx, len, rng)` must consume the rng
/// deterministically.
pub fn chunked_mc<T, F>(n_samples: u64, stream: RngStream, per_chunk: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, u64, &mut ChaCha8Rng) -> T + Sync,
{
    let n_chunks = n_samples.div_ceil(MC_CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let len = MC_CHUNK.min(n_samples - ci * MC_CHUNK);
            let mut rng = stream.substream(ci).rng();
            per_chunk(ci, len, &mut rng)
        })
        .collect()
}
