//! Batch-level performance metrics, arm selection and bootstrap uncertainty.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{FinalStatus, TrialResult};
use crate::spec::TrialSpec;
use crate::stats::{mean, median, quantile_sorted, sd, sorted_copy, MAD_SCALE};
use crate::stochastic::RngStream;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("cannot summarise an empty batch")]
    EmptyBatch,
    #[error("unknown arm {0:?} in selection strategy")]
    UnknownArm(String),
    #[error("unknown selection strategy {0:?}")]
    UnknownStrategy(String),
    #[error("bootstrap needs at least two results")]
    TooFewForBootstrap,
    #[error("interval width must lie in (0, 1), got {0}")]
    Width(f64),
}

/// How an arm is chosen for trials that did not stop for superiority.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionStrategy {
    None,
    /// Active arm with the highest final probability of being best.
    Best,
    /// The design's original control, if still active.
    ControlIfAvailable,
    /// First listed arm (by index) still active.
    FirstOfList(Vec<usize>),
}

impl SelectionStrategy {
    /// Parses `none`, `best`, `control` / `control_if_available`, or a
    /// comma-separated list of arm names.
    pub fn parse(text: &str, spec: &TrialSpec) -> Result<Self, MetricsError> {
        match text.trim() {
            "none" => Ok(Self::None),
            "best" => Ok(Self::Best),
            "control" | "control_if_available" => Ok(Self::ControlIfAvailable),
            "" => Err(MetricsError::UnknownStrategy(text.into())),
            list => list
                .split(',')
                .map(|name| {
                    let name = name.trim();
                    spec.arm_index(name)
                        .ok_or_else(|| MetricsError::UnknownArm(name.into()))
                })
                .collect::<Result<_, _>>()
                .map(Self::FirstOfList),
        }
    }

    pub fn describe(&self, spec: &TrialSpec) -> String {
        match self {
            Self::None => "no selection if no superior arm".into(),
            Self::Best => "best remaining available".into(),
            Self::ControlIfAvailable => "control if available".into(),
            Self::FirstOfList(list) => format!(
                "first available of: {}",
                list.iter()
                    .map(|&i| spec.arms()[i].as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        }
    }
}

/// Arm selected in one trial. A superior arm is always selected.
pub fn select_arm(
    result: &TrialResult,
    strategy: &SelectionStrategy,
    original_control: Option<usize>,
) -> Option<usize> {
    if result.final_status == FinalStatus::Superiority {
        return result.superior_arm;
    }
    match strategy {
        SelectionStrategy::None => None,
        SelectionStrategy::Best => result
            .arms
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.final_prob_best.map(|p| (i, p)))
            .fold(None, |best: Option<(usize, f64)>, (i, p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((i, p)),
            })
            .map(|(i, _)| i),
        SelectionStrategy::ControlIfAvailable => {
            original_control.filter(|&c| result.is_active_at_end(c))
        }
        SelectionStrategy::FirstOfList(list) => {
            list.iter().copied().find(|&a| result.is_active_at_end(a))
        }
    }
}

/// Ideal design percentage from per-arm selection fractions (or counts).
///
/// Absent when nothing was selected or all truths are equal.
pub fn idp(selections: &[f64], true_ys: &[f64], highest_is_best: bool) -> Option<f64> {
    let total: f64 = selections.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let max = true_ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = true_ys.iter().copied().fold(f64::INFINITY, f64::min);
    if max == min {
        return None;
    }
    let (best, worst) = if highest_is_best { (max, min) } else { (min, max) };
    let expected: f64 = selections
        .iter()
        .zip(true_ys)
        .map(|(s, y)| s * y)
        .sum::<f64>()
        / total;
    Some(100.0 * (worst - expected) / (worst - best))
}

/// Options for [`summarize_batch`].
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryOptions {
    pub strategy: SelectionStrategy,
    /// Comparator for treatment-effect errors; defaults to the design's
    /// original control.
    pub reference_arm: Option<usize>,
    /// Use raw estimates (event rates / sample means) instead of posterior
    /// medians for the error metrics.
    pub raw_estimates: bool,
}

impl SummaryOptions {
    pub fn new(strategy: SelectionStrategy) -> Self {
        Self {
            strategy,
            reference_arm: None,
            raw_estimates: false,
        }
    }
}

/// Bootstrap uncertainty of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uncertainty {
    pub err_sd: f64,
    pub err_mad: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub est: Option<f64>,
    pub uncertainty: Option<Uncertainty>,
}

/// The full metric vector in its fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceSummary {
    pub metrics: Vec<Metric>,
}

impl PerformanceSummary {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.metric(name).and_then(|m| m.est)
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.metrics.iter().map(|m| m.name.as_str())
    }
}

/// Metric names in output order for a design's arms.
pub fn metric_names(arms: &[String]) -> Vec<String> {
    let mut names = vec!["n_summarised".to_string()];
    for base in ["size", "sum_ys", "ratio_ys"] {
        for stat in ["mean", "sd", "median", "p25", "p75", "p0", "p100"] {
            names.push(format!("{base}_{stat}"));
        }
    }
    for p in ["conclusive", "superior", "equivalence", "futility", "max"] {
        names.push(format!("prob_{p}"));
    }
    for a in arms {
        names.push(format!("prob_select_arm_{a}"));
    }
    names.push("prob_select_none".into());
    for m in ["rmse", "rmse_te", "mae", "mae_te", "idp"] {
        names.push(m.into());
    }
    names
}

fn distribution(values: &[f64]) -> [f64; 7] {
    let s = sorted_copy(values);
    [
        mean(values),
        sd(values),
        quantile_sorted(&s, 0.5),
        quantile_sorted(&s, 0.25),
        quantile_sorted(&s, 0.75),
        s[0],
        s[s.len() - 1],
    ]
}

/// Metric values for the results at `idx` (a plain or resampled batch).
fn metric_values(
    results: &[TrialResult],
    idx: &[usize],
    spec: &TrialSpec,
    opts: &SummaryOptions,
) -> Vec<Option<f64>> {
    let n = idx.len() as f64;
    let n_arms = spec.n_arms();
    let truth = spec.true_ys();
    let reference = opts.reference_arm.or(spec.control());
    let mut out: Vec<Option<f64>> = vec![Some(n)];

    let size: Vec<f64> = idx.iter().map(|&i| results[i].n_randomised_total as f64).collect();
    let sums: Vec<f64> = idx
        .iter()
        .map(|&i| results[i].arms.iter().map(|a| a.sum_ys).sum())
        .collect();
    let ratio: Vec<f64> = sums.iter().zip(&size).map(|(s, n)| s / n).collect();
    for v in [&size, &sums, &ratio] {
        out.extend(distribution(v).into_iter().map(Some));
    }

    let mut status = [0usize; 4];
    let mut selected = vec![0usize; n_arms + 1];
    let mut errors = Vec::new();
    let mut te_errors = Vec::new();
    for &i in idx {
        let r = &results[i];
        status[r.final_status as usize] += 1;
        let estimate = |a: usize| {
            let arm = &r.arms[a];
            if opts.raw_estimates {
                arm.raw_estimate.unwrap_or(f64::NAN)
            } else {
                arm.posterior_estimate
            }
        };
        match select_arm(r, &opts.strategy, spec.control()) {
            Some(a) => {
                selected[a] += 1;
                errors.push(estimate(a) - truth[a]);
                if let Some(rf) = reference.filter(|&rf| rf != a) {
                    te_errors.push((estimate(a) - estimate(rf)) - (truth[a] - truth[rf]));
                }
            }
            None => selected[n_arms] += 1,
        }
    }
    let frac = |c: usize| Some(c as f64 / n);
    let [sup, equi, fut, max] = status;
    out.push(frac(sup + equi + fut));
    out.extend([frac(sup), frac(equi), frac(fut), frac(max)]);
    out.extend(selected.iter().map(|&c| frac(c)));

    let finite = |v: Vec<f64>| -> Vec<f64> { v.into_iter().filter(|x| x.is_finite()).collect() };
    let errors = finite(errors);
    let te_errors = finite(te_errors);
    let rmse = |e: &[f64]| (!e.is_empty()).then(|| (e.iter().map(|x| x * x).sum::<f64>() / e.len() as f64).sqrt());
    let mae = |e: &[f64]| {
        (!e.is_empty()).then(|| median(&e.iter().map(|x| x.abs()).collect::<Vec<_>>()))
    };
    let te_on = reference.is_some();
    out.push(rmse(&errors));
    out.push(if te_on { rmse(&te_errors) } else { None });
    out.push(mae(&errors));
    out.push(if te_on { mae(&te_errors) } else { None });
    let counts: Vec<f64> = selected[..n_arms].iter().map(|&c| c as f64).collect();
    out.push(idp(&counts, truth, spec.highest_is_best()));
    out
}

/// Summarises a batch without uncertainty measures.
pub fn summarize_batch(
    results: &[TrialResult],
    spec: &TrialSpec,
    opts: &SummaryOptions,
) -> Result<PerformanceSummary, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::EmptyBatch);
    }
    let idx: Vec<usize> = (0..results.len()).collect();
    let values = metric_values(results, &idx, spec, opts);
    Ok(PerformanceSummary {
        metrics: metric_names(spec.arms())
            .into_iter()
            .zip(values)
            .map(|(name, est)| Metric {
                name,
                est,
                uncertainty: None,
            })
            .collect(),
    })
}

/// Summary of a bootstrap distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapEstimate {
    pub estimate: f64,
    pub err_sd: f64,
    pub err_mad: f64,
    pub lo: f64,
    pub hi: f64,
}

fn summarise_draws(draws: &mut [f64], width: f64) -> Option<Uncertainty> {
    if draws.is_empty() {
        return None;
    }
    draws.sort_by(f64::total_cmp);
    let med = quantile_sorted(draws, 0.5);
    let dev: Vec<f64> = draws.iter().map(|d| (d - med).abs()).collect();
    Some(Uncertainty {
        err_sd: sd(draws),
        err_mad: MAD_SCALE * median(&dev),
        lo: quantile_sorted(draws, (1.0 - width) / 2.0),
        hi: quantile_sorted(draws, (1.0 + width) / 2.0),
    })
}

fn resample(rng: &mut RngStream, n: usize, buf: &mut Vec<usize>) {
    buf.clear();
    buf.extend((0..n).map(|_| rng.gen_range(0..n)));
}

/// Nonparametric bootstrap of a scalar statistic over `n` units.
///
/// `stat` receives the resampled unit indices; resamples on which it is
/// undefined (`None`) are excluded from the bootstrap distribution.
pub fn bootstrap_ci(
    n: usize,
    stat: impl Fn(&[usize]) -> Option<f64>,
    n_boot: usize,
    width: f64,
    rng: &mut RngStream,
) -> Result<Option<BootstrapEstimate>, MetricsError> {
    if n < 2 {
        return Err(MetricsError::TooFewForBootstrap);
    }
    if !(width > 0.0 && width < 1.0) {
        return Err(MetricsError::Width(width));
    }
    let all: Vec<usize> = (0..n).collect();
    let Some(estimate) = stat(&all) else {
        return Ok(None);
    };
    let mut buf = Vec::with_capacity(n);
    let mut draws = Vec::with_capacity(n_boot);
    for _ in 0..n_boot {
        resample(rng, n, &mut buf);
        if let Some(v) = stat(&buf) {
            draws.push(v);
        }
    }
    Ok(summarise_draws(&mut draws, width).map(|u| BootstrapEstimate {
        estimate,
        err_sd: u.err_sd,
        err_mad: u.err_mad,
        lo: u.lo,
        hi: u.hi,
    }))
}

/// [`summarize_batch`] with bootstrap uncertainty on every metric.
pub fn summarize_batch_with_uncertainty(
    results: &[TrialResult],
    spec: &TrialSpec,
    opts: &SummaryOptions,
    n_boot: usize,
    width: f64,
    rng: &mut RngStream,
) -> Result<PerformanceSummary, MetricsError> {
    let mut summary = summarize_batch(results, spec, opts)?;
    if results.len() < 2 {
        return Err(MetricsError::TooFewForBootstrap);
    }
    if !(width > 0.0 && width < 1.0) {
        return Err(MetricsError::Width(width));
    }
    let k = summary.metrics.len();
    let mut per_metric: Vec<Vec<f64>> = vec![Vec::with_capacity(n_boot); k];
    let mut buf = Vec::with_capacity(results.len());
    for _ in 0..n_boot {
        resample(rng, results.len(), &mut buf);
        for (j, v) in metric_values(results, &buf, spec, opts).into_iter().enumerate() {
            if let Some(v) = v {
                per_metric[j].push(v);
            }
        }
    }
    for (m, draws) in summary.metrics.iter_mut().zip(per_metric.iter_mut()) {
        if m.est.is_some() {
            m.uncertainty = summarise_draws(draws, width);
        }
    }
    Ok(summary)
}

/// Relative frequency of each set of arms still active at the end.
pub fn remaining_arm_combos(results: &[TrialResult]) -> Vec<(Vec<usize>, f64)> {
    let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for r in results {
        *counts.entry(r.active_at_end()).or_default() += 1;
    }
    let n = results.len() as f64;
    let mut out: Vec<(Vec<usize>, f64)> =
        counts.into_iter().map(|(k, c)| (k, c as f64 / n)).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}
