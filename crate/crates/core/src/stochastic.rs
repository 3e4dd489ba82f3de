//! Deterministic random streams and the primitive samplers used by the engine.
//!
//! Every simulated trial owns one [`RngStream`], derived from
//! `(base_seed, stream_id)`. Derivation is counter-based: a ChaCha8 block
//! function keyed by the base seed, with the stream id as its stream
//! selector, produces the 256-bit state of a xoshiro256++ generator. The
//! sequence a stream yields therefore depends only on the pair, never on
//! which worker consumes it or in what order streams are created.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

/// First stream id reserved for bootstrap resampling.
pub const BOOTSTRAP_STREAM_BASE: u64 = 1 << 62;
/// First stream id reserved for one-off oracles computed at spec construction.
pub const ORACLE_STREAM_BASE: u64 = 3 << 62;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("beta shapes must be positive and finite (got {0}, {1})")]
    BetaShape(f64, f64),
    #[error("standard deviation must be non-negative and finite (got {0})")]
    StdDev(f64),
    #[error("categorical weights must be non-negative and sum to a positive value")]
    Categorical,
}

/// A deterministic generator bound to one `(base_seed, stream_id)` pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    inner: Xoshiro256PlusPlus,
}

impl RngStream {
    pub fn derive(base_seed: u64, stream_id: u64) -> Self {
        let mut keyed = ChaCha8Rng::seed_from_u64(base_seed);
        keyed.set_stream(stream_id);
        keyed.set_word_pos(0);
        let mut state = [0u8; 32];
        keyed.fill_bytes(&mut state);
        // xoshiro must not start from the all-zero state.
        if state.iter().all(|&b| b == 0) {
            state[0] = 1;
        }
        Self {
            inner: Xoshiro256PlusPlus::from_seed(state),
        }
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// Shorthand for [`RngStream::derive`].
pub fn derive_stream(base_seed: u64, stream_id: u64) -> RngStream {
    RngStream::derive(base_seed, stream_id)
}

/// Marsaglia-Tsang gamma sampler with unit scale; shapes below one use the
/// `U^(1/a)` boost.
#[derive(Debug, Clone, Copy)]
pub struct GammaSampler {
    d: f64,
    c: f64,
    inv_shape: Option<f64>,
}

impl GammaSampler {
    pub fn new(shape: f64) -> Self {
        let (base, inv_shape) = if shape < 1.0 {
            (shape + 1.0, Some(1.0 / shape))
        } else {
            (shape, None)
        };
        let d = base - 1.0 / 3.0;
        Self {
            d,
            c: 1.0 / (9.0 * d).sqrt(),
            inv_shape,
        }
    }

    #[inline(always)]
    fn core<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let x: f64 = StandardNormal.sample(rng);
            let v = 1.0 + self.c * x;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u: f64 = rng.gen();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 {
                return self.d * v;
            }
            // Squeeze failed (rare); fall back to the exact log test.
            if u.ln() < 0.5 * x2 + self.d * (1.0 - v + v.ln()) {
                return self.d * v;
            }
        }
    }

    #[inline(always)]
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        let g = self.core(rng);
        match self.inv_shape {
            None => g,
            Some(inv) => {
                let u: f64 = rng.gen();
                g * u.powf(inv)
            }
        }
    }
}

/// Beta sampler built from two gamma variates.
#[derive(Debug, Clone, Copy)]
pub struct BetaSampler {
    a: GammaSampler,
    b: GammaSampler,
}

impl BetaSampler {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, SamplerError> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(SamplerError::BetaShape(alpha, beta));
        }
        Ok(Self {
            a: GammaSampler::new(alpha),
            b: GammaSampler::new(beta),
        })
    }

    #[inline(always)]
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let x = self.a.sample(rng);
            let y = self.b.sample(rng);
            let s = x + y;
            // Both gammas can underflow for tiny shapes.
            if s > 0.0 {
                return x / s;
            }
        }
    }

    pub fn fill<R: RngCore + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for v in out {
            *v = self.sample(rng);
        }
    }
}

pub fn sample_beta<R: RngCore + ?Sized>(
    rng: &mut R,
    alpha: f64,
    beta: f64,
) -> Result<f64, SamplerError> {
    Ok(BetaSampler::new(alpha, beta)?.sample(rng))
}

pub fn sample_binomial<R: RngCore + ?Sized>(
    rng: &mut R,
    n: u64,
    p: f64,
) -> Result<u64, SamplerError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SamplerError::Probability(p));
    }
    if p == 0.0 || n == 0 {
        return Ok(0);
    }
    if p == 1.0 {
        return Ok(n);
    }
    let dist = rand_distr::Binomial::new(n, p).map_err(|_| SamplerError::Probability(p))?;
    Ok(dist.sample(rng))
}

/// Single Bernoulli trial; the hot path of binary outcome generation.
#[inline]
pub fn sample_bernoulli<R: RngCore + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.gen::<f64>() < p
}

pub fn sample_normal<R: RngCore + ?Sized>(
    rng: &mut R,
    mean: f64,
    sd: f64,
) -> Result<f64, SamplerError> {
    if !(sd >= 0.0 && sd.is_finite()) {
        return Err(SamplerError::StdDev(sd));
    }
    let z: f64 = StandardNormal.sample(rng);
    Ok(mean + sd * z)
}

/// Draws an index with probability proportional to `probs`.
///
/// Zero-weight entries are never returned.
pub fn sample_categorical<R: RngCore + ?Sized>(
    rng: &mut R,
    probs: &[f64],
) -> Result<usize, SamplerError> {
    let total: f64 = probs.iter().sum();
    if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) || !(total > 0.0) {
        return Err(SamplerError::Categorical);
    }
    Ok(categorical_unchecked(rng, probs, total))
}

#[inline]
pub(crate) fn categorical_unchecked<R: RngCore + ?Sized>(
    rng: &mut R,
    probs: &[f64],
    total: f64,
) -> usize {
    let u = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    // Rounding left u at or above the accumulated total.
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;

    fn take(rng: &mut RngStream, n: usize) -> Vec<u64> {
        (0..n).map(|_| rng.next_u64()).collect()
    }

    #[test]
    fn identical_pairs_give_identical_sequences() {
        let a = take(&mut derive_stream(4131, 0), 64);
        let b = take(&mut derive_stream(4131, 0), 64);
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_streams_differ() {
        let a = take(&mut derive_stream(4131, 0), 16);
        let b = take(&mut derive_stream(4131, 1), 16);
        let c = take(&mut derive_stream(4132, 0), 16);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn streams_are_thread_invariant() {
        let here = take(&mut derive_stream(4131, 7), 32);
        let there = std::thread::spawn(|| take(&mut derive_stream(4131, 7), 32))
            .join()
            .unwrap();
        assert_eq!(here, there);
    }

    #[test]
    fn degenerate_binomial_and_categorical() {
        let mut rng = derive_stream(1, 1);
        for _ in 0..100 {
            assert_eq!(sample_binomial(&mut rng, 10, 0.0).unwrap(), 0);
            assert_eq!(sample_binomial(&mut rng, 10, 1.0).unwrap(), 10);
            assert_eq!(sample_categorical(&mut rng, &[1.0, 0.0, 0.0]).unwrap(), 0);
            assert_eq!(sample_categorical(&mut rng, &[0.0, 0.0, 2.0]).unwrap(), 2);
        }
    }

    #[test]
    fn domain_errors() {
        let mut rng = derive_stream(1, 2);
        assert!(sample_binomial(&mut rng, 3, 1.5).is_err());
        assert!(sample_beta(&mut rng, 0.0, 1.0).is_err());
        assert!(sample_beta(&mut rng, 1.0, f64::NAN).is_err());
        assert!(sample_normal(&mut rng, 0.0, -1.0).is_err());
        assert!(sample_categorical(&mut rng, &[0.0, 0.0]).is_err());
        assert!(sample_categorical(&mut rng, &[0.5, -0.1]).is_err());
    }

    #[test]
    fn zero_sd_normal_is_constant() {
        let mut rng = derive_stream(1, 3);
        assert_eq!(sample_normal(&mut rng, 5.0, 0.0).unwrap(), 5.0);
    }

    #[test]
    fn small_shape_beta_stays_in_unit_interval() {
        let mut rng = derive_stream(9, 9);
        let s = BetaSampler::new(0.05, 0.05).unwrap();
        for _ in 0..10_000 {
            let x = s.sample(&mut rng);
            assert!((0.0..=1.0).contains(&x));
        }
    }
}
