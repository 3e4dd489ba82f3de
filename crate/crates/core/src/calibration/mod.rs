//! Threshold calibration by Gaussian-process guided search.
//!
//! The search starts from the two ends of the search range (plus any saved
//! evaluations), then repeatedly fits a surrogate, proposes the grid point
//! whose predicted value is closest to the target after an exploration
//! bonus, and evaluates it. It stops at the first evaluation inside the
//! tolerance band or when `iter_max` evaluations have been made.

pub mod gp;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gp::{gp_fit, GpControls, GpModel};

use crate::engine::{EngineError, FinalStatus, TrialResult};
use crate::par::simulate_batch;
use crate::spec::{TrialSpec, ValidationError};

const STORE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("invalid GP controls {0:?}")]
    Controls(GpControls),
    #[error("the GP needs at least two evaluations")]
    TooFewPoints,
    #[error("duplicate evaluation at x = {0}; the noiseless GP cannot fit conflicting values")]
    DuplicateX(f64),
    #[error("GP covariance is not positive definite even with maximal jitter")]
    IllConditioned,
    #[error("every grid point has already been evaluated")]
    GridExhausted,
    #[error("invalid calibration settings: {0}")]
    Settings(String),
    #[error("saved calibration does not match: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Spec(#[from] ValidationError),
    #[error("evaluation failed: {0}")]
    Evaluation(String),
    #[error("calibration store: {0}")]
    Io(#[from] std::io::Error),
    #[error("calibration store: {0}")]
    Json(#[from] serde_json::Error),
}

/// Settings of one calibration run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSettings {
    pub target: f64,
    pub search_range: (f64, f64),
    pub tol: f64,
    /// -1: only values at or below the target are accepted; +1: at or
    /// above; 0: either side.
    pub dir: i8,
    pub iter_max: usize,
    pub controls: GpControls,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            target: 0.05,
            search_range: (0.9, 1.0),
            tol: 0.001,
            dir: 0,
            iter_max: 25,
            controls: GpControls::default(),
        }
    }
}

impl CalibrationSettings {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        let (lo, hi) = self.search_range;
        let bad = |m: &str| Err(CalibrationError::Settings(m.into()));
        if !(lo < hi) {
            return bad("search range must satisfy lower < upper");
        }
        if !(self.tol >= 0.0) {
            return bad("tolerance must be non-negative");
        }
        if !matches!(self.dir, -1..=1) {
            return bad("dir must be -1, 0 or 1");
        }
        if self.iter_max < 2 {
            return bad("iter_max must allow the two initial evaluations");
        }
        self.controls.validate()
    }

    /// Acceptance band for the calibrated metric.
    pub fn band(&self) -> (f64, f64) {
        match self.dir {
            -1 => (self.target - self.tol, self.target),
            1 => (self.target, self.target + self.tol),
            _ => (self.target - self.tol, self.target + self.tol),
        }
    }

    pub fn admissible(&self, y: f64) -> bool {
        // Slack for decimal targets that are not exact in binary.
        let (lo, hi) = self.band();
        y >= lo - 1e-12 && y <= hi + 1e-12
    }
}

/// Outcome of the generic search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub evaluations: Vec<(f64, f64)>,
    pub n_previous: usize,
    pub best_x: f64,
    pub best_y: f64,
    pub success: bool,
}

/// Evaluation closest to the target among admissible ones, else overall.
/// Ties go to the earliest evaluation.
pub fn best_evaluation(evals: &[(f64, f64)], settings: &CalibrationSettings) -> Option<(f64, f64)> {
    let closest = |admissible_only: bool| {
        evals
            .iter()
            .filter(|(_, y)| !admissible_only || settings.admissible(*y))
            .fold(None, |best: Option<(f64, f64)>, &(x, y)| match best {
                Some((_, by)) if (by - settings.target).abs() <= (y - settings.target).abs() => best,
                _ => Some((x, y)),
            })
    };
    closest(true).or_else(|| closest(false))
}

/// Grid range for the next proposal: the span of all consecutive
/// evaluation pairs (ordered by x) whose values straddle the target, or the
/// full search range when nothing straddles.
pub fn narrowed_range(evals: &[(f64, f64)], settings: &CalibrationSettings) -> (f64, f64) {
    if !settings.controls.narrowing {
        return settings.search_range;
    }
    let mut sorted = evals.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let t = settings.target;
    let mut span: Option<(f64, f64)> = None;
    for w in sorted.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        if (y0 - t) * (y1 - t) <= 0.0 {
            span = Some(match span {
                None => (x0, x1),
                Some((lo, hi)) => (lo.min(x0), hi.max(x1)),
            });
        }
    }
    span.unwrap_or(settings.search_range)
}

/// Unvisited grid point over `range` minimising `|mu - target| - kappa * sd`.
/// Ties go to the smallest x.
pub fn propose_next(
    model: &GpModel,
    range: (f64, f64),
    resolution: usize,
    target: f64,
    kappa: f64,
    visited: &[f64],
) -> Result<f64, CalibrationError> {
    let (lo, hi) = range;
    let step = (hi - lo) / (resolution - 1) as f64;
    let eps = (hi - lo).abs() * 1e-9 + f64::EPSILON;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..resolution {
        let x = if i + 1 == resolution { hi } else { lo + step * i as f64 };
        if visited.iter().any(|v| (v - x).abs() <= eps) {
            continue;
        }
        let (mu, sd) = model.predict(x);
        let score = (mu - target).abs() - kappa * sd;
        if best.map_or(true, |(_, s)| score < s) {
            best = Some((x, score));
        }
    }
    best.map(|(x, _)| x).ok_or(CalibrationError::GridExhausted)
}

/// Runs the search against an arbitrary scalar function of the threshold.
///
/// `previous` evaluations are reused and count towards `iter_max`; the two
/// range endpoints are evaluated only if not already present. `on_eval` is
/// called after every new evaluation.
pub fn calibrate_fn<E: std::fmt::Display>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    settings: &CalibrationSettings,
    previous: &[(f64, f64)],
    mut on_eval: impl FnMut(f64, f64),
) -> Result<SearchResult, CalibrationError> {
    settings.validate()?;
    let mut evals: Vec<(f64, f64)> = previous.to_vec();
    let done = |evals: &[(f64, f64)]| evals.iter().any(|&(_, y)| settings.admissible(y));
    let mut eval = |x: f64, evals: &mut Vec<(f64, f64)>| -> Result<(), CalibrationError> {
        let y = f(x).map_err(|e| CalibrationError::Evaluation(e.to_string()))?;
        evals.push((x, y));
        on_eval(x, y);
        Ok(())
    };

    let (lo, hi) = settings.search_range;
    for x in [lo, hi] {
        if done(&evals) || evals.len() >= settings.iter_max {
            break;
        }
        if !evals.iter().any(|&(e, _)| e == x) {
            eval(x, &mut evals)?;
        }
    }
    while !done(&evals) && evals.len() < settings.iter_max {
        let xs: Vec<f64> = evals.iter().map(|e| e.0).collect();
        let ys: Vec<f64> = evals.iter().map(|e| e.1).collect();
        let model = gp_fit(&xs, &ys, &settings.controls, settings.search_range)?;
        let range = narrowed_range(&evals, settings);
        let x = propose_next(
            &model,
            range,
            settings.controls.resolution,
            settings.target,
            settings.controls.kappa,
            &xs,
        )?;
        eval(x, &mut evals)?;
    }

    let (best_x, best_y) = best_evaluation(&evals, settings).ok_or(CalibrationError::TooFewPoints)?;
    Ok(SearchResult {
        success: settings.admissible(best_y),
        n_previous: previous.len(),
        evaluations: evals,
        best_x,
        best_y,
    })
}

/// Fraction of a batch that stopped for superiority.
pub fn prob_superior(batch: &[TrialResult]) -> f64 {
    batch
        .iter()
        .filter(|r| r.final_status == FinalStatus::Superiority)
        .count() as f64
        / batch.len() as f64
}

/// Simulates `spec` with superiority `x` and inferiority `1 - x` at every
/// look and returns the probability of stopping for superiority.
pub fn evaluate_threshold(
    spec: &TrialSpec,
    x: f64,
    n_rep: usize,
    base_seed: u64,
) -> Result<(f64, Vec<TrialResult>), CalibrationError> {
    let spec = spec.with_symmetric_thresholds(x)?;
    let batch = simulate_batch(&spec, n_rep, base_seed)?;
    Ok((prob_superior(&batch), batch))
}

/// Calibrated design and the batch simulated at the chosen threshold.
#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub search: SearchResult,
    pub settings: CalibrationSettings,
    pub n_rep: usize,
    pub base_seed: u64,
    pub best_trial_spec: TrialSpec,
    pub best_batch: Vec<TrialResult>,
}

/// Calibrates the symmetric superiority/inferiority threshold of `spec` so
/// that the superiority probability hits the target. Every evaluation uses
/// the same seed, so differences between thresholds are not blurred by
/// independent Monte Carlo noise.
pub fn calibrate(
    spec: &TrialSpec,
    settings: &CalibrationSettings,
    n_rep: usize,
    base_seed: u64,
    previous: &[(f64, f64)],
    on_eval: impl FnMut(f64, f64),
) -> Result<CalibrationResult, CalibrationError> {
    let mut kept: Option<(f64, f64, Vec<TrialResult>)> = None;
    let search = calibrate_fn(
        |x| -> Result<f64, CalibrationError> {
            let (y, batch) = evaluate_threshold(spec, x, n_rep, base_seed)?;
            // Hold on to the batch of the best evaluation so far only.
            let replace = match &kept {
                None => true,
                Some((kx, ky, _)) => best_evaluation(&[(*kx, *ky), (x, y)], settings) == Some((x, y)),
            };
            if replace {
                kept = Some((x, y, batch));
            }
            Ok(y)
        },
        settings,
        previous,
        on_eval,
    );
    let search = search?;
    let best_trial_spec = spec.with_symmetric_thresholds(search.best_x)?;
    let best_batch = match kept {
        Some((x, _, batch)) if x == search.best_x => batch,
        _ => simulate_batch(&best_trial_spec, n_rep, base_seed)?,
    };
    Ok(CalibrationResult {
        search,
        settings: *settings,
        n_rep,
        base_seed,
        best_trial_spec,
        best_batch,
    })
}

/// Saved evaluations of a calibration, keyed by design and settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationStore {
    pub version: u32,
    pub fingerprint: String,
    pub settings: CalibrationSettings,
    pub n_rep: usize,
    pub base_seed: u64,
    pub evaluations: Vec<(f64, f64)>,
}

impl CalibrationStore {
    pub fn new(spec: &TrialSpec, settings: &CalibrationSettings, n_rep: usize, base_seed: u64) -> Self {
        Self {
            version: STORE_VERSION,
            fingerprint: spec.fingerprint(),
            settings: *settings,
            n_rep,
            base_seed,
            evaluations: Vec::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CalibrationError> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(self)?)?;
        fs::rename(tmp, path)?;
        Ok(())
    }

    /// Loads saved evaluations if `path` exists. A file written for another
    /// design, seed, repetition count or settings is an error.
    pub fn load_matching(path: &Path, expected: &CalibrationStore) -> Result<Option<Self>, CalibrationError> {
        if !path.exists() {
            return Ok(None);
        }
        let stored: CalibrationStore = serde_json::from_slice(&fs::read(path)?)?;
        if stored.version > STORE_VERSION {
            return Err(CalibrationError::Mismatch(format!(
                "store version {} is newer than supported version {STORE_VERSION}",
                stored.version
            )));
        }
        let mut diffs = Vec::new();
        if stored.fingerprint != expected.fingerprint {
            diffs.push("design fingerprint");
        }
        if stored.settings != expected.settings {
            diffs.push("settings");
        }
        if stored.n_rep != expected.n_rep {
            diffs.push("n_rep");
        }
        if stored.base_seed != expected.base_seed {
            diffs.push("base_seed");
        }
        if !diffs.is_empty() {
            return Err(CalibrationError::Mismatch(diffs.join(", ")));
        }
        Ok(Some(stored))
    }
}
