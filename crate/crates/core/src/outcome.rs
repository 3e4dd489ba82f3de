//! Outcome generation under scenario truths and posterior sampling per arm.

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stochastic::{
    derive_stream, sample_bernoulli, BetaSampler, SamplerError, ORACLE_STREAM_BASE,
};
use rand_distr::{Distribution, StandardNormal};

/// Variance of the hurdle-beta positive part when not given explicitly.
pub const DEFAULT_HURDLE_VARIANCE: f64 = 0.05;
pub const DEFAULT_MAX_DAYS: u32 = 29;
/// Draws used to compute the natural-scale truth of a hurdle-beta arm.
pub const HURDLE_TRUTH_DRAWS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OutcomeError {
    #[error("arm index {0} is not part of the design")]
    UnknownArm(usize),
    #[error("outcome parameters cover {got} arms, design has {expected}")]
    ArmCount { expected: usize, got: usize },
    #[error("{field} for arm {arm} is {value}, outside its domain")]
    Parameter {
        field: &'static str,
        arm: usize,
        value: f64,
    },
    #[error("beta variance {var} infeasible for mean {mean}: need 0 < var < mean(1 - mean)")]
    InfeasibleVariance { mean: f64, var: f64 },
    #[error("prior standard deviation must be positive (got {0})")]
    PriorSd(f64),
    #[error("negative or inconsistent counts for arm {arm}: {events} events of {n}")]
    Counts { arm: usize, events: u64, n: u64 },
    #[error("no outcome data available")]
    NoData,
    #[error("the pooled-prior model needs at least two arms")]
    PooledArms,
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

fn flat_prior() -> [f64; 2] {
    [1.0, 1.0]
}

fn default_hurdle_variance() -> f64 {
    DEFAULT_HURDLE_VARIANCE
}

fn default_max_days() -> u32 {
    DEFAULT_MAX_DAYS
}

/// Data-generating and analysis model for one outcome type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum OutcomeModel {
    /// Binary outcome, conjugate beta-binomial analysis.
    Binomial {
        true_ys: Vec<f64>,
        #[serde(default = "flat_prior")]
        prior: [f64; 2],
    },
    /// Normally distributed outcome, normal approximation with flat priors.
    Normal { true_ys: Vec<f64>, sds: Vec<f64> },
    /// Zero-inflated count of days: a Bernoulli hurdle for zeros and a
    /// beta-distributed proportion of `max_days`, rounded up.
    HurdleBetaDays {
        prop_zero: Vec<f64>,
        mean_prop: Vec<f64>,
        #[serde(default = "default_hurdle_variance")]
        variance: f64,
        #[serde(default = "default_max_days")]
        max_days: u32,
    },
    /// Binary outcome with a neutral informative prior expressed on the
    /// log-odds scale and converted to pseudo-observations.
    BinomialPooledPrior { true_ys: Vec<f64>, prior_sd: f64 },
}

impl OutcomeModel {
    pub fn binomial(true_ys: Vec<f64>) -> Self {
        Self::Binomial {
            true_ys,
            prior: flat_prior(),
        }
    }

    pub fn n_arms(&self) -> usize {
        match self {
            Self::Binomial { true_ys, .. }
            | Self::Normal { true_ys, .. }
            | Self::BinomialPooledPrior { true_ys, .. } => true_ys.len(),
            Self::HurdleBetaDays { prop_zero, .. } => prop_zero.len(),
        }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, Self::Binomial { .. } | Self::BinomialPooledPrior { .. })
    }

    pub fn validate(&self, n_arms: usize) -> Result<(), OutcomeError> {
        let check_len = |got: usize| {
            if got != n_arms {
                Err(OutcomeError::ArmCount {
                    expected: n_arms,
                    got,
                })
            } else {
                Ok(())
            }
        };
        let check_prob = |field: &'static str, xs: &[f64]| {
            for (arm, &value) in xs.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    return Err(OutcomeError::Parameter { field, arm, value });
                }
            }
            Ok(())
        };
        match self {
            Self::Binomial { true_ys, prior } => {
                check_len(true_ys.len())?;
                check_prob("true_ys", true_ys)?;
                for (arm, &value) in prior.iter().enumerate() {
                    if !(value > 0.0 && value.is_finite()) {
                        return Err(OutcomeError::Parameter {
                            field: "prior",
                            arm,
                            value,
                        });
                    }
                }
            }
            Self::Normal { true_ys, sds } => {
                check_len(true_ys.len())?;
                check_len(sds.len())?;
                for (arm, (&m, &s)) in true_ys.iter().zip(sds).enumerate() {
                    if !m.is_finite() {
                        return Err(OutcomeError::Parameter {
                            field: "true_ys",
                            arm,
                            value: m,
                        });
                    }
                    if !(s >= 0.0 && s.is_finite()) {
                        return Err(OutcomeError::Parameter {
                            field: "sds",
                            arm,
                            value: s,
                        });
                    }
                }
            }
            Self::HurdleBetaDays {
                prop_zero,
                mean_prop,
                variance,
                max_days,
            } => {
                check_len(prop_zero.len())?;
                check_len(mean_prop.len())?;
                check_prob("prop_zero", prop_zero)?;
                if *max_days == 0 {
                    return Err(OutcomeError::Parameter {
                        field: "max_days",
                        arm: 0,
                        value: 0.0,
                    });
                }
                for &m in mean_prop {
                    beta_params_from_mean_var(m, *variance)?;
                }
            }
            Self::BinomialPooledPrior { true_ys, prior_sd } => {
                check_len(true_ys.len())?;
                check_prob("true_ys", true_ys)?;
                if n_arms < 2 {
                    return Err(OutcomeError::PooledArms);
                }
                if !(*prior_sd > 0.0) {
                    return Err(OutcomeError::PriorSd(*prior_sd));
                }
            }
        }
        Ok(())
    }

    /// Natural-scale truth per arm (event probabilities or means).
    ///
    /// For the hurdle-beta model this is the empirical mean of the rounded
    /// distribution from a fixed-seed oracle, since the ceiling shifts the
    /// analytic mean upwards.
    pub fn true_ys(&self) -> Vec<f64> {
        match self {
            Self::Binomial { true_ys, .. }
            | Self::Normal { true_ys, .. }
            | Self::BinomialPooledPrior { true_ys, .. } => true_ys.clone(),
            Self::HurdleBetaDays {
                prop_zero,
                mean_prop,
                variance,
                max_days,
            } => prop_zero
                .iter()
                .zip(mean_prop)
                .enumerate()
                .map(|(arm, (&p0, &m))| {
                    let gen = HurdleArm::new(p0, m, *variance, *max_days)
                        .expect("validated hurdle parameters");
                    let mut rng = derive_stream(0x5eed, ORACLE_STREAM_BASE + arm as u64);
                    let total: f64 = (0..HURDLE_TRUTH_DRAWS)
                        .map(|_| gen.sample(&mut rng))
                        .sum();
                    total / HURDLE_TRUTH_DRAWS as f64
                })
                .collect(),
        }
    }

    pub(crate) fn generator(&self) -> Result<OutcomeGenerator, OutcomeError> {
        Ok(match self {
            Self::Binomial { true_ys, .. } | Self::BinomialPooledPrior { true_ys, .. } => {
                OutcomeGenerator::Bernoulli(true_ys.clone())
            }
            Self::Normal { true_ys, sds } => OutcomeGenerator::Normal(
                true_ys.iter().copied().zip(sds.iter().copied()).collect(),
            ),
            Self::HurdleBetaDays {
                prop_zero,
                mean_prop,
                variance,
                max_days,
            } => OutcomeGenerator::Hurdle(
                prop_zero
                    .iter()
                    .zip(mean_prop)
                    .map(|(&p0, &m)| HurdleArm::new(p0, m, *variance, *max_days))
                    .collect::<Result<_, _>>()?,
            ),
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct HurdleArm {
    prop_zero: f64,
    positive: BetaSampler,
    max_days: f64,
}

impl HurdleArm {
    fn new(prop_zero: f64, mean: f64, var: f64, max_days: u32) -> Result<Self, OutcomeError> {
        let (a, b) = beta_params_from_mean_var(mean, var)?;
        Ok(Self {
            prop_zero,
            positive: BetaSampler::new(a, b)?,
            max_days: max_days as f64,
        })
    }

    #[inline]
    fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        if sample_bernoulli(rng, self.prop_zero) {
            return 0.0;
        }
        let days = (self.positive.sample(rng) * self.max_days).ceil();
        days.clamp(1.0, self.max_days)
    }
}

/// Per-arm samplers resolved once per trial.
#[derive(Debug, Clone)]
pub(crate) enum OutcomeGenerator {
    Bernoulli(Vec<f64>),
    Normal(Vec<(f64, f64)>),
    Hurdle(Vec<HurdleArm>),
}

impl OutcomeGenerator {
    fn n_arms(&self) -> usize {
        match self {
            Self::Bernoulli(v) => v.len(),
            Self::Normal(v) => v.len(),
            Self::Hurdle(v) => v.len(),
        }
    }

    #[inline]
    pub(crate) fn sample<R: RngCore + ?Sized>(&self, arm: usize, rng: &mut R) -> f64 {
        match self {
            Self::Bernoulli(p) => {
                if sample_bernoulli(rng, p[arm]) {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Normal(params) => {
                let (m, s) = params[arm];
                let z: f64 = StandardNormal.sample(rng);
                m + s * z
            }
            Self::Hurdle(arms) => arms[arm].sample(rng),
        }
    }
}

/// Outcomes for a sequence of allocations, positionally aligned with `allocs`.
pub fn generate_outcomes<R: RngCore + ?Sized>(
    model: &OutcomeModel,
    allocs: &[usize],
    rng: &mut R,
) -> Result<Vec<f64>, OutcomeError> {
    let gen = model.generator()?;
    let n_arms = gen.n_arms();
    allocs
        .iter()
        .map(|&arm| {
            if arm >= n_arms {
                Err(OutcomeError::UnknownArm(arm))
            } else {
                Ok(gen.sample(arm, rng))
            }
        })
        .collect()
}

/// Method-of-moments beta shapes for a given mean and variance.
pub fn beta_params_from_mean_var(mean: f64, var: f64) -> Result<(f64, f64), OutcomeError> {
    if !(mean > 0.0 && mean < 1.0 && var > 0.0 && var < mean * (1.0 - mean)) {
        return Err(OutcomeError::InfeasibleVariance { mean, var });
    }
    let common = var + mean * mean - mean;
    let alpha = (mean * common / var).abs();
    let beta = (common * (mean - 1.0) / var).abs();
    Ok((alpha, beta))
}

/// Matrix of posterior draws, one column per analysed arm, stored
/// column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    columns: Vec<usize>,
    n_draws: usize,
    values: Vec<f64>,
}

impl PosteriorDraws {
    /// Builds a matrix from per-arm columns. Panics if the columns are ragged.
    pub fn from_columns(columns: Vec<usize>, data: Vec<Vec<f64>>) -> Self {
        assert_eq!(columns.len(), data.len());
        let n_draws = data.first().map_or(0, Vec::len);
        assert!(data.iter().all(|c| c.len() == n_draws), "ragged columns");
        Self {
            columns,
            n_draws,
            values: data.into_iter().flatten().collect(),
        }
    }

    pub(crate) fn with_capacity(columns: Vec<usize>, n_draws: usize) -> Self {
        let len = columns.len() * n_draws;
        Self {
            columns,
            n_draws,
            values: vec![0.0; len],
        }
    }

    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    /// Arm indices of the columns, in canonical order.
    pub fn arms(&self) -> &[usize] {
        &self.columns
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn position(&self, arm: usize) -> Option<usize> {
        self.columns.iter().position(|&a| a == arm)
    }

    pub fn column(&self, pos: usize) -> &[f64] {
        &self.values[pos * self.n_draws..(pos + 1) * self.n_draws]
    }

    pub fn arm_column(&self, arm: usize) -> Option<&[f64]> {
        self.position(arm).map(|p| self.column(p))
    }

    pub(crate) fn column_mut(&mut self, pos: usize) -> &mut [f64] {
        &mut self.values[pos * self.n_draws..(pos + 1) * self.n_draws]
    }
}

/// Conjugate beta-binomial posteriors: arm `i` gets
/// `Beta(a0 + events_i, b0 + n_i - events_i)`.
pub fn posterior_beta_binomial<R: RngCore + ?Sized>(
    arms: &[usize],
    events: &[u64],
    n: &[u64],
    prior: [f64; 2],
    n_draws: usize,
    rng: &mut R,
) -> Result<PosteriorDraws, OutcomeError> {
    check_counts(arms, events, n)?;
    let mut draws = PosteriorDraws::with_capacity(arms.to_vec(), n_draws);
    for (pos, (&e, &m)) in events.iter().zip(n).enumerate() {
        let sampler = BetaSampler::new(prior[0] + e as f64, prior[1] + (m - e) as f64)?;
        sampler.fill(rng, draws.column_mut(pos));
    }
    Ok(draws)
}

fn check_counts(arms: &[usize], events: &[u64], n: &[u64]) -> Result<(), OutcomeError> {
    assert_eq!(arms.len(), events.len());
    assert_eq!(arms.len(), n.len());
    for ((&arm, &e), &m) in arms.iter().zip(events).zip(n) {
        if e > m {
            return Err(OutcomeError::Counts {
                arm,
                events: e,
                n: m,
            });
        }
    }
    Ok(())
}

/// Running count, mean and squared deviations (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ArmSummary {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl ArmSummary {
    #[inline]
    pub fn push(&mut self, y: f64) {
        self.n += 1;
        let delta = y - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (y - self.mean);
    }

    pub fn from_values(ys: &[f64]) -> Self {
        let mut s = Self::default();
        for &y in ys {
            s.push(y);
        }
        s
    }

    pub fn sum(&self) -> f64 {
        self.mean * self.n as f64
    }

    /// Sample standard deviation (n - 1 denominator).
    pub fn sd(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0).sqrt()
        }
    }
}

/// Pooled summary used by the sparse-arm fallback of the normal approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledRange {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Normal-approximation posterior per arm from raw outcome lists.
pub fn posterior_normal_approx<R: RngCore + ?Sized>(
    arms: &[usize],
    ys: &[Vec<f64>],
    n_draws: usize,
    rng: &mut R,
) -> Result<PosteriorDraws, OutcomeError> {
    assert_eq!(arms.len(), ys.len());
    let all: Vec<f64> = ys.iter().flatten().copied().collect();
    if all.is_empty() {
        return Err(OutcomeError::NoData);
    }
    let pooled = PooledRange {
        mean: all.iter().sum::<f64>() / all.len() as f64,
        min: all.iter().copied().fold(f64::INFINITY, f64::min),
        max: all.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    let summaries: Vec<ArmSummary> = ys.iter().map(|v| ArmSummary::from_values(v)).collect();
    posterior_normal_from_summaries(arms, &summaries, pooled, n_draws, rng)
}

/// Arms with more than one observation get
/// `Normal(mean, sd / sqrt(n - 1))`; sparser arms get the pooled mean with a
/// standard deviation of 1000 times the pooled range.
pub fn posterior_normal_from_summaries<R: RngCore + ?Sized>(
    arms: &[usize],
    summaries: &[ArmSummary],
    pooled: PooledRange,
    n_draws: usize,
    rng: &mut R,
) -> Result<PosteriorDraws, OutcomeError> {
    let mut draws = PosteriorDraws::with_capacity(arms.to_vec(), n_draws);
    for (pos, s) in summaries.iter().enumerate() {
        let (mean, sd) = if s.n > 1 {
            (s.mean, s.sd() / ((s.n - 1) as f64).sqrt())
        } else {
            (pooled.mean, 1000.0 * (pooled.max - pooled.min))
        };
        if !(mean.is_finite() && sd.is_finite()) {
            return Err(OutcomeError::NoData);
        }
        for v in draws.column_mut(pos) {
            let z: f64 = StandardNormal.sample(rng);
            *v = mean + sd * z;
        }
    }
    Ok(draws)
}

/// Total sample size a normal(0, prior_sd) log-odds-ratio prior is worth at
/// pooled event rate `r`; non-finite results fall back to 1.
pub fn pooled_prior_effective_n(prior_sd: f64, pooled_rate: f64) -> Result<f64, OutcomeError> {
    if !(prior_sd > 0.0) {
        return Err(OutcomeError::PriorSd(prior_sd));
    }
    let r = pooled_rate;
    let n = (1.0 / (prior_sd * prior_sd)) * (4.0 / r + 4.0 / (1.0 - r));
    Ok(if n.is_finite() { n } else { 1.0 })
}

/// Beta posteriors whose prior is half the prior-equivalent sample size per
/// arm, split by the pooled event rate.
///
/// `pooled_events`/`pooled_n` give the rate `r` over every analysed
/// participant, which may include arms no longer in `arms`.
#[allow(clippy::too_many_arguments)]
pub fn posterior_beta_pooled_prior<R: RngCore + ?Sized>(
    arms: &[usize],
    events: &[u64],
    n: &[u64],
    pooled_events: u64,
    pooled_n: u64,
    prior_sd: f64,
    n_draws: usize,
    rng: &mut R,
) -> Result<PosteriorDraws, OutcomeError> {
    check_counts(arms, events, n)?;
    let r = if pooled_n == 0 {
        f64::NAN
    } else {
        pooled_events as f64 / pooled_n as f64
    };
    let n_prior = pooled_prior_effective_n(prior_sd, r)?;
    let (prior_a, prior_b) = if r.is_finite() {
        (n_prior * r / 2.0, n_prior * (1.0 - r) / 2.0)
    } else {
        (0.0, 0.0)
    };
    let mut draws = PosteriorDraws::with_capacity(arms.to_vec(), n_draws);
    for (pos, (&e, &m)) in events.iter().zip(n).enumerate() {
        // With no events (or only events) one shape is zero; keep it proper.
        let a = (prior_a + e as f64).max(f64::MIN_POSITIVE);
        let b = (prior_b + (m - e) as f64).max(f64::MIN_POSITIVE);
        BetaSampler::new(a, b)?.fill(rng, draws.column_mut(pos));
    }
    Ok(draws)
}

/// Convenience wrapper taking per-arm counts for every arm of a pooled design.
pub fn pooled_shapes(events: &[u64], n: &[u64], prior_sd: f64) -> Result<Vec<(f64, f64)>, OutcomeError> {
    let pe: u64 = events.iter().sum();
    let pn: u64 = n.iter().sum();
    let r = pe as f64 / pn as f64;
    let n_prior = pooled_prior_effective_n(prior_sd, r)?;
    Ok(events
        .iter()
        .zip(n)
        .map(|(&e, &m)| (n_prior * r / 2.0 + e as f64, n_prior * (1.0 - r) / 2.0 + (m - e) as f64))
        .collect())
}
