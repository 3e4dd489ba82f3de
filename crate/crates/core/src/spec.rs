//! Declarative trial designs and their validation.
//!
//! A [`TrialDesign`] is what users write: scalar thresholds, `auto` start
//! probabilities, optional per-arm limits. [`validate_spec`] turns it into
//! an immutable [`TrialSpec`] with every per-look vector broadcast and every
//! cross-field invariant checked. All downstream modules consume only
//! validated specs.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use thiserror::Error;

use crate::outcome::{OutcomeError, OutcomeModel};

const PROB_TOL: f64 = 1e-9;

/// Per-look value given either once for all looks or look by look.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerLook {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl PerLook {
    fn broadcast(&self, n_looks: usize) -> Result<Vec<f64>, usize> {
        match self {
            Self::Scalar(x) => Ok(vec![*x; n_looks]),
            Self::Vector(v) if v.len() == n_looks => Ok(v.clone()),
            Self::Vector(v) => Err(v.len()),
        }
    }
}

impl From<f64> for PerLook {
    fn from(x: f64) -> Self {
        Self::Scalar(x)
    }
}

impl From<Vec<f64>> for PerLook {
    fn from(v: Vec<f64>) -> Self {
        Self::Vector(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StartProbs {
    /// Equal allocation, or the square-root rule for the control arm when
    /// `control_prob_fixed` is `sqrt_based`.
    #[default]
    Auto,
    #[serde(untagged)]
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RescaleMode {
    #[default]
    None,
    /// Scale min/max limits by initial/current active arm count after drops.
    Limits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ControlRule {
    #[default]
    None,
    /// Control gets sqrt(k) : 1 against each of the k active non-control arms.
    SqrtBased,
    /// Control matches the largest non-control allocation probability.
    Match,
}

/// User-facing design, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDesign {
    pub arms: Vec<String>,
    #[serde(default)]
    pub control: Option<String>,
    pub outcome: OutcomeModel,
    pub highest_is_best: bool,
    #[serde(default)]
    pub start_probs: StartProbs,
    #[serde(default)]
    pub fixed_probs: Option<Vec<Option<f64>>>,
    #[serde(default)]
    pub min_probs: Option<Vec<Option<f64>>>,
    #[serde(default)]
    pub max_probs: Option<Vec<Option<f64>>>,
    #[serde(default)]
    pub rescale_probs: RescaleMode,
    pub soften_power: PerLook,
    #[serde(default)]
    pub control_prob_fixed: ControlRule,
    pub data_looks: Vec<usize>,
    pub randomised_at_looks: Vec<usize>,
    pub superiority: PerLook,
    pub inferiority: PerLook,
    #[serde(default)]
    pub equivalence_prob: Option<PerLook>,
    #[serde(default)]
    pub equivalence_diff: Option<f64>,
    #[serde(default)]
    pub equivalence_only_first: bool,
    #[serde(default)]
    pub futility_prob: Option<PerLook>,
    #[serde(default)]
    pub futility_diff: Option<f64>,
    #[serde(default)]
    pub futility_only_first: bool,
    pub n_draws: usize,
}

/// One invariant violation found by [`validate_spec`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Violation {
    #[error("at least two arms are required (got {0})")]
    TooFewArms(usize),
    #[error("arm name {0:?} is duplicated")]
    DuplicateArm(String),
    #[error("control arm {0:?} is not one of the arms")]
    UnknownControl(String),
    #[error("{field} has {got} entries, expected {expected}")]
    Length {
        field: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("start_probs sum to {0}, not 1")]
    StartProbsSum(f64),
    #[error("{field}[{index}] = {value} is outside [0, 1]")]
    OutOfRange {
        field: &'static str,
        index: usize,
        value: f64,
    },
    #[error("min_probs sum to {0}; must be below 1")]
    MinProbsTooLarge(f64),
    #[error("max_probs sum to {0}; must exceed 1")]
    MaxProbsTooSmall(f64),
    #[error("fixed_probs sum to {0}; must not exceed 1")]
    FixedProbsTooLarge(f64),
    #[error("arm {0:?} has both a fixed probability and min/max limits")]
    FixedWithLimits(String),
    #[error("arm {0:?} has min_probs above max_probs")]
    MinAboveMax(String),
    #[error("look {look}: inferiority {inferiority} is not below superiority {superiority}")]
    ThresholdsOverlap {
        look: usize,
        superiority: f64,
        inferiority: f64,
    },
    #[error("futility rules require a common control arm")]
    FutilityWithoutControl,
    #[error("{0} requires both a probability threshold and a difference")]
    IncompleteRule(&'static str),
    #[error("{0} must be a positive, finite difference")]
    NonPositiveDiff(&'static str),
    #[error("{0} must not be empty")]
    EmptyLooks(&'static str),
    #[error("{0} must be strictly increasing positive integers")]
    LooksNotIncreasing(&'static str),
    #[error("look {look}: {randomised} randomised is fewer than {data} with data")]
    RandomisedBeforeData {
        look: usize,
        data: usize,
        randomised: usize,
    },
    #[error("the last data look ({data}) must equal the last randomised look ({randomised})")]
    FinalLookMismatch { data: usize, randomised: usize },
    #[error("control_prob_fixed requires a common control arm")]
    ControlRuleWithoutControl,
    #[error("control_prob_fixed conflicts with fixed/min/max probabilities on the control arm")]
    ControlRuleConflict,
    #[error("n_draws must be positive")]
    ZeroDraws,
    #[error("outcome model: {0}")]
    Outcome(#[from] OutcomeError),
}

/// All violations found in one design.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ValidationError(pub Vec<Violation>);

impl ValidationError {
    pub fn violations(&self) -> &[Violation] {
        &self.0
    }

    pub fn contains(&self, pred: impl Fn(&Violation) -> bool) -> bool {
        self.0.iter().any(pred)
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid trial design:")?;
        for v in &self.0 {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityRule {
    pub prob: Vec<f64>,
    pub diff: f64,
    pub only_first: bool,
}

/// Thresholds in force at one look.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSet {
    pub superiority: f64,
    pub inferiority: f64,
    pub equivalence_prob: Option<f64>,
    pub futility_prob: Option<f64>,
}

#[derive(Debug, Error, PartialEq)]
#[error("look {look} is outside the schedule of {n_looks} looks")]
pub struct LookOutOfRange {
    pub look: usize,
    pub n_looks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LookSchedule {
    pub look_index: usize,
    pub n_data: usize,
    pub n_randomised: usize,
}

/// A validated, normalised design. Immutable; share freely across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialSpec {
    arms: Vec<String>,
    control: Option<usize>,
    outcome: OutcomeModel,
    true_ys: Vec<f64>,
    highest_is_best: bool,
    start_probs: Vec<f64>,
    fixed_probs: Vec<Option<f64>>,
    min_probs: Vec<Option<f64>>,
    max_probs: Vec<Option<f64>>,
    rescale_probs: RescaleMode,
    soften_power: Vec<f64>,
    control_prob_fixed: ControlRule,
    data_looks: Vec<usize>,
    randomised_at_looks: Vec<usize>,
    superiority: Vec<f64>,
    inferiority: Vec<f64>,
    equivalence: Option<ProbabilityRule>,
    futility: Option<ProbabilityRule>,
    n_draws: usize,
}

/// `sqrt(k) / (sqrt(k) + k)`: the control allocation giving a sqrt(k):1
/// ratio against each of `k` non-control arms.
pub fn sqrt_control_prob(n_noncontrol_active: usize) -> Option<f64> {
    if n_noncontrol_active < 1 {
        return None;
    }
    let k = n_noncontrol_active as f64;
    Some(k.sqrt() / (k.sqrt() + k))
}

fn per_arm(
    field: &'static str,
    v: &Option<Vec<Option<f64>>>,
    n: usize,
    errs: &mut Vec<Violation>,
) -> Vec<Option<f64>> {
    match v {
        None => vec![None; n],
        Some(v) if v.len() != n => {
            errs.push(Violation::Length {
                field,
                expected: n,
                got: v.len(),
            });
            vec![None; n]
        }
        Some(v) => {
            for (index, x) in v.iter().enumerate() {
                if let Some(value) = *x {
                    if !(0.0..=1.0).contains(&value) {
                        errs.push(Violation::OutOfRange { field, index, value });
                    }
                }
            }
            v.clone()
        }
    }
}

fn per_look(
    field: &'static str,
    v: &PerLook,
    n_looks: usize,
    errs: &mut Vec<Violation>,
) -> Vec<f64> {
    match v.broadcast(n_looks) {
        Ok(values) => {
            for (index, &value) in values.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    errs.push(Violation::OutOfRange { field, index, value });
                }
            }
            values
        }
        Err(got) => {
            errs.push(Violation::Length {
                field,
                expected: n_looks,
                got,
            });
            vec![0.5; n_looks]
        }
    }
}

fn strictly_increasing(v: &[usize]) -> bool {
    v.first().is_some_and(|&x| x > 0) && v.windows(2).all(|w| w[0] < w[1])
}

/// Validates a design and resolves defaults, or lists every violation.
pub fn validate_spec(design: &TrialDesign) -> Result<TrialSpec, ValidationError> {
    let mut errs = Vec::new();
    let n = design.arms.len();
    if n < 2 {
        errs.push(Violation::TooFewArms(n));
    }
    for (i, a) in design.arms.iter().enumerate() {
        if design.arms[..i].contains(a) {
            errs.push(Violation::DuplicateArm(a.clone()));
        }
    }
    let control = match &design.control {
        None => None,
        Some(c) => match design.arms.iter().position(|a| a == c) {
            Some(i) => Some(i),
            None => {
                errs.push(Violation::UnknownControl(c.clone()));
                None
            }
        },
    };

    if let Err(e) = design.outcome.validate(n) {
        errs.push(e.into());
    }

    // Looks.
    let n_looks = design.data_looks.len();
    if design.data_looks.is_empty() {
        errs.push(Violation::EmptyLooks("data_looks"));
    } else if !strictly_increasing(&design.data_looks) {
        errs.push(Violation::LooksNotIncreasing("data_looks"));
    }
    if design.randomised_at_looks.len() != n_looks {
        errs.push(Violation::Length {
            field: "randomised_at_looks",
            expected: n_looks,
            got: design.randomised_at_looks.len(),
        });
    } else if n_looks > 0 {
        if !strictly_increasing(&design.randomised_at_looks) {
            errs.push(Violation::LooksNotIncreasing("randomised_at_looks"));
        }
        for (look, (&data, &randomised)) in design
            .data_looks
            .iter()
            .zip(&design.randomised_at_looks)
            .enumerate()
        {
            if randomised < data {
                errs.push(Violation::RandomisedBeforeData {
                    look,
                    data,
                    randomised,
                });
            }
        }
        let (d, r) = (
            design.data_looks[n_looks - 1],
            design.randomised_at_looks[n_looks - 1],
        );
        if d != r {
            errs.push(Violation::FinalLookMismatch {
                data: d,
                randomised: r,
            });
        }
    }

    // Allocation.
    let fixed = per_arm("fixed_probs", &design.fixed_probs, n, &mut errs);
    let mins = per_arm("min_probs", &design.min_probs, n, &mut errs);
    let maxs = per_arm("max_probs", &design.max_probs, n, &mut errs);
    for i in 0..n {
        if fixed[i].is_some() && (mins[i].is_some() || maxs[i].is_some()) {
            errs.push(Violation::FixedWithLimits(design.arms[i].clone()));
        }
        if let (Some(lo), Some(hi)) = (mins[i], maxs[i]) {
            if lo > hi {
                errs.push(Violation::MinAboveMax(design.arms[i].clone()));
            }
        }
    }
    let min_sum: f64 = mins.iter().map(|m| m.unwrap_or(0.0)).sum();
    if (design.min_probs.is_some()) && min_sum >= 1.0 {
        errs.push(Violation::MinProbsTooLarge(min_sum));
    }
    let max_sum: f64 = maxs.iter().map(|m| m.unwrap_or(1.0)).sum();
    if design.max_probs.is_some() && max_sum <= 1.0 {
        errs.push(Violation::MaxProbsTooSmall(max_sum));
    }
    let fixed_sum: f64 = fixed.iter().map(|m| m.unwrap_or(0.0)).sum();
    if fixed_sum > 1.0 + PROB_TOL {
        errs.push(Violation::FixedProbsTooLarge(fixed_sum));
    }

    match (design.control_prob_fixed, control) {
        (ControlRule::None, _) => {}
        (_, None) => errs.push(Violation::ControlRuleWithoutControl),
        (_, Some(c)) => {
            if fixed[c].is_some() || mins[c].is_some() || maxs[c].is_some() {
                errs.push(Violation::ControlRuleConflict);
            }
        }
    }

    let start_probs = match &design.start_probs {
        StartProbs::Explicit(p) => {
            if p.len() != n {
                errs.push(Violation::Length {
                    field: "start_probs",
                    expected: n,
                    got: p.len(),
                });
            }
            for (index, &value) in p.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    errs.push(Violation::OutOfRange {
                        field: "start_probs",
                        index,
                        value,
                    });
                }
            }
            let s: f64 = p.iter().sum();
            if (s - 1.0).abs() > PROB_TOL {
                errs.push(Violation::StartProbsSum(s));
            }
            p.clone()
        }
        StartProbs::Auto => auto_start_probs(n, control, design.control_prob_fixed),
    };

    // Stopping rules.
    let soften_power = per_look("soften_power", &design.soften_power, n_looks, &mut errs);
    let superiority = per_look("superiority", &design.superiority, n_looks, &mut errs);
    let inferiority = per_look("inferiority", &design.inferiority, n_looks, &mut errs);
    for (look, (&s, &i)) in superiority.iter().zip(&inferiority).enumerate() {
        if i >= s {
            errs.push(Violation::ThresholdsOverlap {
                look,
                superiority: s,
                inferiority: i,
            });
        }
    }
    let rule = |name: &'static str,
                    diff_name: &'static str,
                    prob: &Option<PerLook>,
                    diff: Option<f64>,
                    only_first: bool,
                    errs: &mut Vec<Violation>| {
        match (prob, diff) {
            (None, None) => None,
            (Some(p), Some(d)) => {
                if !(d > 0.0 && d.is_finite()) {
                    errs.push(Violation::NonPositiveDiff(diff_name));
                }
                Some(ProbabilityRule {
                    prob: per_look(name, p, n_looks, errs),
                    diff: d,
                    only_first,
                })
            }
            _ => {
                errs.push(Violation::IncompleteRule(name));
                None
            }
        }
    };
    let equivalence = rule(
        "equivalence_prob",
        "equivalence_diff",
        &design.equivalence_prob,
        design.equivalence_diff,
        design.equivalence_only_first,
        &mut errs,
    );
    let futility = rule(
        "futility_prob",
        "futility_diff",
        &design.futility_prob,
        design.futility_diff,
        design.futility_only_first,
        &mut errs,
    );
    if futility.is_some() && design.control.is_none() {
        errs.push(Violation::FutilityWithoutControl);
    }
    if design.n_draws == 0 {
        errs.push(Violation::ZeroDraws);
    }

    if !errs.is_empty() {
        return Err(ValidationError(errs));
    }
    let true_ys = design.outcome.true_ys();
    Ok(TrialSpec {
        arms: design.arms.clone(),
        control,
        outcome: design.outcome.clone(),
        true_ys,
        highest_is_best: design.highest_is_best,
        start_probs,
        fixed_probs: fixed,
        min_probs: mins,
        max_probs: maxs,
        rescale_probs: design.rescale_probs,
        soften_power,
        control_prob_fixed: design.control_prob_fixed,
        data_looks: design.data_looks.clone(),
        randomised_at_looks: design.randomised_at_looks.clone(),
        superiority,
        inferiority,
        equivalence,
        futility,
        n_draws: design.n_draws,
    })
}

fn auto_start_probs(n: usize, control: Option<usize>, rule: ControlRule) -> Vec<f64> {
    match (control, rule) {
        (Some(c), ControlRule::SqrtBased) if n >= 2 => {
            let pc = sqrt_control_prob(n - 1).unwrap_or(0.5);
            let rest = (1.0 - pc) / (n - 1) as f64;
            (0..n).map(|i| if i == c { pc } else { rest }).collect()
        }
        _ => vec![1.0 / n.max(1) as f64; n],
    }
}

impl TrialSpec {
    pub fn arms(&self) -> &[String] {
        &self.arms
    }

    pub fn n_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn arm_index(&self, name: &str) -> Option<usize> {
        self.arms.iter().position(|a| a == name)
    }

    pub fn control(&self) -> Option<usize> {
        self.control
    }

    pub fn outcome(&self) -> &OutcomeModel {
        &self.outcome
    }

    /// Natural-scale truth per arm.
    pub fn true_ys(&self) -> &[f64] {
        &self.true_ys
    }

    pub fn highest_is_best(&self) -> bool {
        self.highest_is_best
    }

    pub fn start_probs(&self) -> &[f64] {
        &self.start_probs
    }

    pub fn fixed_probs(&self) -> &[Option<f64>] {
        &self.fixed_probs
    }

    pub fn min_probs(&self) -> &[Option<f64>] {
        &self.min_probs
    }

    pub fn max_probs(&self) -> &[Option<f64>] {
        &self.max_probs
    }

    pub fn rescale_probs(&self) -> RescaleMode {
        self.rescale_probs
    }

    pub fn soften_power(&self) -> &[f64] {
        &self.soften_power
    }

    pub fn control_prob_fixed(&self) -> ControlRule {
        self.control_prob_fixed
    }

    pub fn data_looks(&self) -> &[usize] {
        &self.data_looks
    }

    pub fn randomised_at_looks(&self) -> &[usize] {
        &self.randomised_at_looks
    }

    pub fn n_looks(&self) -> usize {
        self.data_looks.len()
    }

    pub fn max_n(&self) -> usize {
        *self.randomised_at_looks.last().expect("validated schedule")
    }

    pub fn schedule(&self) -> impl Iterator<Item = LookSchedule> + '_ {
        self.data_looks
            .iter()
            .zip(&self.randomised_at_looks)
            .enumerate()
            .map(|(look_index, (&n_data, &n_randomised))| LookSchedule {
                look_index,
                n_data,
                n_randomised,
            })
    }

    pub fn superiority(&self) -> &[f64] {
        &self.superiority
    }

    pub fn inferiority(&self) -> &[f64] {
        &self.inferiority
    }

    pub fn equivalence(&self) -> Option<&ProbabilityRule> {
        self.equivalence.as_ref()
    }

    pub fn futility(&self) -> Option<&ProbabilityRule> {
        self.futility.as_ref()
    }

    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn thresholds_at_look(&self, look: usize) -> Result<ThresholdSet, LookOutOfRange> {
        if look >= self.n_looks() {
            return Err(LookOutOfRange {
                look,
                n_looks: self.n_looks(),
            });
        }
        Ok(ThresholdSet {
            superiority: self.superiority[look],
            inferiority: self.inferiority[look],
            equivalence_prob: self.equivalence.as_ref().map(|r| r.prob[look]),
            futility_prob: self.futility.as_ref().map(|r| r.prob[look]),
        })
    }

    /// The normalised design this spec was built from. Validating it again
    /// yields an equal spec.
    pub fn to_design(&self) -> TrialDesign {
        let opt = |v: &[Option<f64>]| {
            if v.iter().all(Option::is_none) {
                None
            } else {
                Some(v.to_vec())
            }
        };
        TrialDesign {
            arms: self.arms.clone(),
            control: self.control.map(|c| self.arms[c].clone()),
            outcome: self.outcome.clone(),
            highest_is_best: self.highest_is_best,
            start_probs: StartProbs::Explicit(self.start_probs.clone()),
            fixed_probs: opt(&self.fixed_probs),
            min_probs: opt(&self.min_probs),
            max_probs: opt(&self.max_probs),
            rescale_probs: self.rescale_probs,
            soften_power: PerLook::Vector(self.soften_power.clone()),
            control_prob_fixed: self.control_prob_fixed,
            data_looks: self.data_looks.clone(),
            randomised_at_looks: self.randomised_at_looks.clone(),
            superiority: PerLook::Vector(self.superiority.clone()),
            inferiority: PerLook::Vector(self.inferiority.clone()),
            equivalence_prob: self.equivalence.as_ref().map(|r| PerLook::Vector(r.prob.clone())),
            equivalence_diff: self.equivalence.as_ref().map(|r| r.diff),
            equivalence_only_first: self.equivalence.as_ref().is_some_and(|r| r.only_first),
            futility_prob: self.futility.as_ref().map(|r| PerLook::Vector(r.prob.clone())),
            futility_diff: self.futility.as_ref().map(|r| r.diff),
            futility_only_first: self.futility.as_ref().is_some_and(|r| r.only_first),
            n_draws: self.n_draws,
        }
    }

    /// Copy with constant superiority `x` and inferiority `1 - x` at every look.
    pub fn with_symmetric_thresholds(&self, superiority: f64) -> Result<Self, ValidationError> {
        let mut design = self.to_design();
        design.superiority = PerLook::Scalar(superiority);
        design.inferiority = PerLook::Scalar(1.0 - superiority);
        self.revalidate(design)
    }

    /// Copy with a different outcome model (scenario truth).
    pub fn with_outcome(&self, outcome: OutcomeModel) -> Result<Self, ValidationError> {
        let mut design = self.to_design();
        design.outcome = outcome;
        validate_spec(&design)
    }

    fn revalidate(&self, design: TrialDesign) -> Result<Self, ValidationError> {
        // Outcome unchanged: skip recomputing the truth oracle.
        let mut errs = Vec::new();
        let sup = per_look("superiority", &design.superiority, self.n_looks(), &mut errs);
        let inf = per_look("inferiority", &design.inferiority, self.n_looks(), &mut errs);
        for (look, (&s, &i)) in sup.iter().zip(&inf).enumerate() {
            if i >= s {
                errs.push(Violation::ThresholdsOverlap {
                    look,
                    superiority: s,
                    inferiority: i,
                });
            }
        }
        if !errs.is_empty() {
            return Err(ValidationError(errs));
        }
        Ok(Self {
            superiority: sup,
            inferiority: inf,
            ..self.clone()
        })
    }

    /// SHA-256 over the canonical JSON form of the normalised design.
    pub fn fingerprint(&self) -> String {
        hash_json(&self.to_design())
    }

    /// Fingerprint that ignores the scenario truth, so scenario variants of
    /// one design share it.
    pub fn design_fingerprint(&self) -> String {
        let mut design = self.to_design();
        design.outcome = truthless(&design.outcome);
        hash_json(&design)
    }
}

fn truthless(model: &OutcomeModel) -> OutcomeModel {
    let mut m = model.clone();
    match &mut m {
        OutcomeModel::Binomial { true_ys, .. } | OutcomeModel::BinomialPooledPrior { true_ys, .. } => {
            true_ys.clear()
        }
        OutcomeModel::Normal { true_ys, sds } => {
            true_ys.clear();
            sds.clear();
        }
        OutcomeModel::HurdleBetaDays {
            prop_zero,
            mean_prop,
            ..
        } => {
            prop_zero.clear();
            mean_prop.clear();
        }
    }
    m
}

fn hash_json<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("designs serialise");
    let digest = Sha256::digest(&json);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
