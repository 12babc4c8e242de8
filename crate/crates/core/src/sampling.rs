//! Seeded randomness for the solvers.
//!
//! All draws come from ChaCha8 (`rand_chacha`), seeded with a `u64` through
//! `SeedableRng::seed_from_u64`. ChaCha output is specified independently of
//! platform and word size, so a seed fixes every trace bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("mini-batch size {b} outside [1, {n}]")]
    BatchOutOfRange { n: usize, b: usize },
    #[error("inner loop length m must be at least 1")]
    EmptyInnerLoop,
    #[error("stepsize must be positive and finite, got {0}")]
    InvalidStepsize(f64),
    #[error("strong convexity lower bounds must be nonnegative (nu_f = {nu_f}, nu_r = {nu_r})")]
    NegativeLowerBound { nu_f: f64, nu_r: f64 },
    #[error("h * nu_f = {0} must be below 1 for a positive geometric ratio")]
    NonPositiveRatio(f64),
}

/// Deterministic random stream: ChaCha8 keyed by `seed`, on a given stream id.
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent stream `stream` under the same seed.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngState { seed, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform integer in `[lo, hi)`.
    pub fn index_in(&mut self, lo: usize, hi: usize) -> usize {
        self.rng.random_range(lo..hi)
    }

    pub fn inner(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Draws uniform size-`b` subsets of `0..n` by partial Fisher-Yates.
///
/// The index pool is reused between draws without being reset: a partial
/// shuffle of any fixed arrangement leaves a uniformly distributed prefix,
/// so each draw costs `O(b)` rather than `O(n)`.
#[derive(Debug, Clone)]
pub struct MinibatchSampler {
    pool: Vec<usize>,
}

impl MinibatchSampler {
    pub fn new(n: usize) -> Self {
        MinibatchSampler { pool: (0..n).collect() }
    }

    pub fn n(&self) -> usize {
        self.pool.len()
    }

    /// Returns `b` distinct 0-based indices; the slice is valid until the
    /// next call.
    pub fn sample(&mut self, rng: &mut RngState, b: usize) -> Result<&[usize], SamplingError> {
        let n = self.pool.len();
        if b == 0 || b > n {
            return Err(SamplingError::BatchOutOfRange { n, b });
        }
        if b < n {
            for i in 0..b {
                let j = rng.index_in(i, n);
                self.pool.swap(i, j);
            }
        }
        Ok(&self.pool[..b])
    }
}

/// One-shot mini-batch draw; returns sorted 0-based indices.
pub fn sample_minibatch(rng: &mut RngState, n: usize, b: usize) -> Result<Vec<usize>, SamplingError> {
    let mut sampler = MinibatchSampler::new(n);
    let mut batch = sampler.sample(rng, b)?.to_vec();
    batch.sort_unstable();
    Ok(batch)
}

/// Variance attenuation of a without-replacement sample mean of size `b`
/// out of `n`: `(n - b) / (b (n - 1))`, with `alpha(1, 1) = 0`.
pub fn alpha(n: usize, b: usize) -> Result<f64, SamplingError> {
    if b == 0 || b > n {
        return Err(SamplingError::BatchOutOfRange { n, b });
    }
    if n == 1 {
        return Ok(0.0);
    }
    Ok((n - b) as f64 / (b as f64 * (n - 1) as f64))
}

/// Law of the inner-loop length `t ∈ {1..m}`: `q_t ∝ r^(m - t)` with
/// `r = (1 - h nu_f) / (1 + h nu_r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerLoopDistribution {
    m: usize,
    h: f64,
    nu_f: f64,
    nu_r: f64,
    ratio: f64,
    gamma: f64,
    q: Vec<f64>,
    cdf: Vec<f64>,
}

impl InnerLoopDistribution {
    pub fn new(m: usize, h: f64, nu_f: f64, nu_r: f64) -> Result<Self, SamplingError> {
        if m == 0 {
            return Err(SamplingError::EmptyInnerLoop);
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(SamplingError::InvalidStepsize(h));
        }
        if !(nu_f >= 0.0 && nu_r >= 0.0) {
            return Err(SamplingError::NegativeLowerBound { nu_f, nu_r });
        }
        if h * nu_f >= 1.0 {
            return Err(SamplingError::NonPositiveRatio(h * nu_f));
        }
        let ratio = (1.0 - h * nu_f) / (1.0 + h * nu_r);

        // weights[t - 1] = r^(m - t), filled from t = m downwards.
        let mut weights = vec![0.0; m];
        let mut power = 1.0;
        for w in weights.iter_mut().rev() {
            *w = power;
            power *= ratio;
        }
        let gamma: f64 = weights.iter().sum();
        let q: Vec<f64> = weights.iter().map(|w| w / gamma).collect();

        let mut cdf = Vec::with_capacity(m);
        let mut acc = 0.0;
        for &p in &q {
            acc += p;
            cdf.push(acc);
        }
        *cdf.last_mut().unwrap() = 1.0;

        Ok(InnerLoopDistribution {
            m,
            h,
            nu_f,
            nu_r,
            ratio,
            gamma,
            q,
            cdf,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn stepsize(&self) -> f64 {
        self.h
    }

    pub fn nu_f(&self) -> f64 {
        self.nu_f
    }

    pub fn nu_r(&self) -> f64 {
        self.nu_r
    }

    /// Geometric ratio `r`.
    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// Normalizer `γ = Σ_{t=1}^m r^(m - t)`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `q[t - 1] = q_t`.
    pub fn probabilities(&self) -> &[f64] {
        &self.q
    }

    /// `E[t] = Σ t q_t`.
    pub fn expected_length(&self) -> f64 {
        self.q.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum()
    }

    /// Inverse-CDF draw of `t ∈ [1, m]`.
    pub fn sample(&self, rng: &mut RngState) -> usize {
        let u = rng.uniform();
        let idx = self.cdf.partition_point(|&c| c <= u);
        idx.min(self.m - 1) + 1
    }
}
