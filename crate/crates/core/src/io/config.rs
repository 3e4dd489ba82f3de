//! TOML design files.
//!
//! A file holds one `[design]` table (every field of [`TrialDesign`], with
//! a few shorthands), optional `[run]` defaults and any number of
//! `[[scenario]]` blocks that replace the outcome truth only.
//!
//! Shorthands accepted inside `[design]`:
//!
//! * `data_looks = { from = 500, to = 10000, by = 250 }`
//! * `randomised_at_looks = { lag = 200 }`, meaning `min(look + lag, last look)`
//! * thresholds as a scalar, a per-look list, or
//!   `{ burn_in_until = 1500, value = 0.9 }`, which disables the rule
//!   (threshold 1) at looks with fewer than 1500 analysed participants
//! * per-arm lists may contain the string `"NA"` for "not set".

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::outcome::OutcomeModel;
use crate::spec::{
    validate_spec, ControlRule, PerLook, RescaleMode, StartProbs, TrialDesign, TrialSpec,
    ValidationError,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("{context}: {source}")]
    Invalid {
        context: String,
        source: ValidationError,
    },
    #[error("{0}")]
    Shorthand(String),
    #[error("scenario {index}: {message}")]
    Scenario { index: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum NaOr {
    Value(f64),
    Na(NaTag),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
enum NaTag {
    #[serde(rename = "NA")]
    Na,
}

fn na_list(v: Option<Vec<NaOr>>) -> Option<Vec<Option<f64>>> {
    v.map(|xs| {
        xs.into_iter()
            .map(|x| match x {
                NaOr::Value(f) => Some(f),
                NaOr::Na(_) => None,
            })
            .collect()
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Looks {
    List(Vec<usize>),
    Range(LookRange),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct LookRange {
    from: usize,
    to: usize,
    by: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Randomised {
    List(Vec<usize>),
    Lag(LagSpec),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct LagSpec {
    lag: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Threshold {
    Scalar(f64),
    Vector(Vec<f64>),
    BurnIn(BurnIn),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct BurnIn {
    burn_in_until: usize,
    value: f64,
    /// Threshold used during burn-in; defaults to the disabling sentinel.
    #[serde(default)]
    during: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDesign {
    arms: Vec<String>,
    #[serde(default)]
    control: Option<String>,
    outcome: OutcomeModel,
    highest_is_best: bool,
    #[serde(default)]
    start_probs: StartProbs,
    #[serde(default)]
    fixed_probs: Option<Vec<NaOr>>,
    #[serde(default)]
    min_probs: Option<Vec<NaOr>>,
    #[serde(default)]
    max_probs: Option<Vec<NaOr>>,
    #[serde(default)]
    rescale_probs: RescaleMode,
    #[serde(default = "no_softening")]
    soften_power: Threshold,
    #[serde(default)]
    control_prob_fixed: ControlRule,
    data_looks: Looks,
    randomised_at_looks: Option<Randomised>,
    superiority: Threshold,
    inferiority: Threshold,
    #[serde(default)]
    equivalence_prob: Option<Threshold>,
    #[serde(default)]
    equivalence_diff: Option<f64>,
    #[serde(default)]
    equivalence_only_first: bool,
    #[serde(default)]
    futility_prob: Option<Threshold>,
    #[serde(default)]
    futility_diff: Option<f64>,
    #[serde(default)]
    futility_only_first: bool,
    #[serde(default = "default_draws")]
    n_draws: usize,
}

fn no_softening() -> Threshold {
    Threshold::Scalar(1.0)
}

fn default_draws() -> usize {
    5000
}

/// Default run settings from the `[run]` table.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunDefaults {
    #[serde(default)]
    pub n_rep: Option<usize>,
    #[serde(default)]
    pub base_seed: Option<u64>,
    /// Selection strategy for metrics (`none`, `best`, `control`, or a
    /// comma-separated arm list).
    #[serde(default)]
    pub select_strategy: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    true_ys: Option<Vec<f64>>,
    #[serde(default)]
    sds: Option<Vec<f64>>,
    #[serde(default)]
    prop_zero: Option<Vec<f64>>,
    #[serde(default)]
    mean_prop: Option<Vec<f64>>,
    #[serde(default)]
    base_seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    label: Option<String>,
    design: RawDesign,
    #[serde(default)]
    run: Option<RunDefaults>,
    #[serde(default)]
    scenario: Vec<RawScenario>,
}

/// A scenario variant of the base design.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: String,
    pub spec: TrialSpec,
    pub base_seed: Option<u64>,
}

/// Everything a design file describes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecSet {
    pub label: Option<String>,
    pub base: TrialSpec,
    pub run: RunDefaults,
    pub scenarios: Vec<Scenario>,
}

fn expand_looks(l: Looks) -> Result<Vec<usize>, ConfigError> {
    match l {
        Looks::List(v) => Ok(v),
        Looks::Range(r) if r.by == 0 || r.from > r.to => Err(ConfigError::Shorthand(format!(
            "data_looks range needs by > 0 and from <= to (got from {}, to {}, by {})",
            r.from, r.to, r.by
        ))),
        Looks::Range(r) => Ok((r.from..=r.to).step_by(r.by).collect()),
    }
}

fn expand_threshold(t: Threshold, looks: &[usize]) -> PerLook {
    match t {
        Threshold::Scalar(x) => PerLook::Scalar(x),
        Threshold::Vector(v) => PerLook::Vector(v),
        Threshold::BurnIn(b) => PerLook::Vector(
            looks
                .iter()
                .map(|&n| if n < b.burn_in_until { b.during.unwrap_or(1.0) } else { b.value })
                .collect(),
        ),
    }
}

fn design_from_raw(raw: RawDesign) -> Result<TrialDesign, ConfigError> {
    let data_looks = expand_looks(raw.data_looks)?;
    let last = data_looks.last().copied().unwrap_or(0);
    let randomised_at_looks = match raw.randomised_at_looks {
        None => data_looks.clone(),
        Some(Randomised::List(v)) => v,
        Some(Randomised::Lag(l)) => data_looks.iter().map(|&d| (d + l.lag).min(last)).collect(),
    };
    let th = |t: Threshold| expand_threshold(t, &data_looks);
    Ok(TrialDesign {
        arms: raw.arms,
        control: raw.control,
        outcome: raw.outcome,
        highest_is_best: raw.highest_is_best,
        start_probs: raw.start_probs,
        fixed_probs: na_list(raw.fixed_probs),
        min_probs: na_list(raw.min_probs),
        max_probs: na_list(raw.max_probs),
        rescale_probs: raw.rescale_probs,
        soften_power: th(raw.soften_power),
        control_prob_fixed: raw.control_prob_fixed,
        superiority: th(raw.superiority),
        inferiority: th(raw.inferiority),
        equivalence_prob: raw.equivalence_prob.map(th),
        equivalence_diff: raw.equivalence_diff,
        equivalence_only_first: raw.equivalence_only_first,
        futility_prob: raw.futility_prob.map(th),
        futility_diff: raw.futility_diff,
        futility_only_first: raw.futility_only_first,
        n_draws: raw.n_draws,
        data_looks,
        randomised_at_looks,
    })
}

/// Replaces the truth of `model` with the values a scenario supplies.
fn override_truth(model: &OutcomeModel, s: &RawScenario, index: usize) -> Result<OutcomeModel, ConfigError> {
    let err = |message: &str| ConfigError::Scenario {
        index,
        message: message.into(),
    };
    let mut m = model.clone();
    match &mut m {
        OutcomeModel::Binomial { true_ys, .. } | OutcomeModel::BinomialPooledPrior { true_ys, .. } => {
            if s.sds.is_some() || s.prop_zero.is_some() || s.mean_prop.is_some() {
                return Err(err("binary outcome scenarios take true_ys only"));
            }
            *true_ys = s.true_ys.clone().ok_or_else(|| err("missing true_ys"))?;
        }
        OutcomeModel::Normal { true_ys, sds } => {
            if s.prop_zero.is_some() || s.mean_prop.is_some() {
                return Err(err("normal outcome scenarios take true_ys and sds"));
            }
            if let Some(v) = &s.true_ys {
                *true_ys = v.clone();
            }
            if let Some(v) = &s.sds {
                *sds = v.clone();
            }
        }
        OutcomeModel::HurdleBetaDays {
            prop_zero,
            mean_prop,
            ..
        } => {
            if s.true_ys.is_some() || s.sds.is_some() {
                return Err(err("hurdle outcome scenarios take prop_zero and mean_prop"));
            }
            if let Some(v) = &s.prop_zero {
                *prop_zero = v.clone();
            }
            if let Some(v) = &s.mean_prop {
                *mean_prop = v.clone();
            }
        }
    }
    Ok(m)
}

/// Parses and validates a design document.
pub fn parse_config_str(text: &str) -> Result<SpecSet, ConfigError> {
    let raw: RawFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let outcome = raw.design.outcome.clone();
    let design = design_from_raw(raw.design)?;
    let base = validate_spec(&design).map_err(|source| ConfigError::Invalid {
        context: "design".into(),
        source,
    })?;
    let mut scenarios = Vec::with_capacity(raw.scenario.len());
    for (index, s) in raw.scenario.iter().enumerate() {
        let model = override_truth(&outcome, s, index + 1)?;
        let spec = base.with_outcome(model).map_err(|source| ConfigError::Invalid {
            context: format!("scenario {}", index + 1),
            source,
        })?;
        let label = s.label.clone().unwrap_or_else(|| super::grid::scenario_label(&spec));
        scenarios.push(Scenario {
            label,
            spec,
            base_seed: s.base_seed,
        });
    }
    Ok(SpecSet {
        label: raw.label,
        base,
        run: raw.run.unwrap_or(RunDefaults {
            n_rep: None,
            base_seed: None,
            select_strategy: None,
        }),
        scenarios,
    })
}

/// Reads and parses a design file.
pub fn parse_config(path: &Path) -> Result<SpecSet, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::fixtures::primary_null;

    pub(crate) const PRIMARY: &str = r#"
label = "primary null"

[design]
arms = ["Arm A", "Arm B", "Arm C"]
highest_is_best = false
start_probs = [0.3333333333333333, 0.3333333333333333, 0.3333333333333333]
min_probs = [0.25, 0.25, 0.25]
rescale_probs = "limits"
soften_power = 0.5
data_looks = { from = 500, to = 10000, by = 250 }
randomised_at_looks = { lag = 200 }
superiority = 0.99
inferiority = 0.01
equivalence_prob = { burn_in_until = 1500, value = 0.9 }
equivalence_diff = 0.025
n_draws = 10000

[design.outcome]
model = "binomial"
true_ys = [0.25, 0.25, 0.25]

[run]
n_rep = 10000
base_seed = 4131

[[scenario]]
true_ys = [0.25, 0.20, 0.25]
"#;

    #[test]
    fn primary_config_matches_programmatic_spec() {
        let set = parse_config_str(PRIMARY).unwrap();
        let expected = validate_spec(&primary_null()).unwrap();
        assert_eq!(set.base, expected);
        assert_eq!(set.run.base_seed, Some(4131));
    }

    #[test]
    fn scenario_overrides_truth_only() {
        let set = parse_config_str(PRIMARY).unwrap();
        let s = &set.scenarios[0];
        assert_eq!(s.label, "A 25.0 - B 20.0 - C 25.0");
        assert_eq!(s.spec.true_ys(), &[0.25, 0.20, 0.25]);
        assert_ne!(s.spec.fingerprint(), set.base.fingerprint());
        assert_eq!(s.spec.design_fingerprint(), set.base.design_fingerprint());
    }

    #[test]
    fn single_arm_is_rejected() {
        let text = PRIMARY
            .replace(r#"arms = ["Arm A", "Arm B", "Arm C"]"#, r#"arms = ["Arm A"]"#);
        assert!(matches!(parse_config_str(&text), Err(ConfigError::Invalid { .. })));
    }

    #[test]
    fn unknown_keys_are_errors_with_location() {
        let text = PRIMARY.replace("n_draws = 10000", "n_draws = 10000\nn_drawz = 5");
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn na_entries_and_explicit_lists() {
        let text = PRIMARY
            .replace("min_probs = [0.25, 0.25, 0.25]", r#"min_probs = [0.25, "NA", 0.25]"#)
            .replace("randomised_at_looks = { lag = 200 }", "")
            .replace("data_looks = { from = 500, to = 10000, by = 250 }", "data_looks = [500, 1000]")
            .replace("equivalence_prob = { burn_in_until = 1500, value = 0.9 }", "equivalence_prob = [1.0, 0.9]");
        let set = parse_config_str(&text).unwrap();
        assert_eq!(set.base.min_probs(), &[Some(0.25), None, Some(0.25)]);
        assert_eq!(set.base.randomised_at_looks(), &[500, 1000]);
    }
}
