//! Scenario grids: effect offsets crossed over a set of arms.

use thiserror::Error;

use crate::outcome::OutcomeModel;
use crate::spec::{TrialSpec, ValidationError};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("scenario grids need an outcome with per-arm means (binomial or normal)")]
    UnsupportedOutcome,
    #[error("arm index {0} is out of range")]
    ArmIndex(usize),
    #[error("no effects given")]
    NoEffects,
    #[error("scenario {label}: {source}")]
    Invalid {
        label: String,
        source: ValidationError,
    },
}

/// One grid point. `index` is 1-based in generation order after
/// de-duplication and is used to derive the scenario seed.
#[derive(Debug, Clone)]
pub struct GridScenario {
    pub index: usize,
    pub label: String,
    pub effects: Vec<f64>,
    pub spec: TrialSpec,
}

impl GridScenario {
    pub fn seed(&self, base_seed: u64) -> u64 {
        base_seed + self.index as u64
    }
}

fn short_name(name: &str) -> &str {
    name.strip_prefix("Arm ").unwrap_or(name)
}

/// `"A 25.0 - B 27.5 - C 25.0"` for binary outcomes (percentages), plain
/// values otherwise.
pub fn scenario_label(spec: &TrialSpec) -> String {
    let binary = matches!(
        spec.outcome(),
        OutcomeModel::Binomial { .. } | OutcomeModel::BinomialPooledPrior { .. }
    );
    spec.arms()
        .iter()
        .zip(spec.true_ys())
        .map(|(a, y)| {
            if binary {
                format!("{} {:.1}", short_name(a), 100.0 * y)
            } else {
                format!("{} {:.3}", short_name(a), y)
            }
        })
        .collect::<Vec<_>>()
        .join(" - ")
}

fn shifted(model: &OutcomeModel, offsets: &[f64]) -> Result<OutcomeModel, GridError> {
    let mut m = model.clone();
    match &mut m {
        OutcomeModel::Binomial { true_ys, .. }
        | OutcomeModel::BinomialPooledPrior { true_ys, .. }
        | OutcomeModel::Normal { true_ys, .. } => {
            for (y, d) in true_ys.iter_mut().zip(offsets) {
                *y += d;
            }
        }
        OutcomeModel::HurdleBetaDays { .. } => return Err(GridError::UnsupportedOutcome),
    }
    Ok(m)
}

/// Crosses `effects` over `free_arms` (the first free arm varies fastest)
/// and adds each combination to the base truth. Without a control arm the
/// free arms are exchangeable, so combinations that permute an earlier one
/// are dropped.
pub fn scenario_grid(
    base: &TrialSpec,
    effects: &[f64],
    free_arms: &[usize],
) -> Result<Vec<GridScenario>, GridError> {
    if effects.is_empty() {
        return Err(GridError::NoEffects);
    }
    if let Some(&bad) = free_arms.iter().find(|&&i| i >= base.n_arms()) {
        return Err(GridError::ArmIndex(bad));
    }
    let dedup = base.control().is_none();
    let total = effects.len().pow(free_arms.len() as u32);
    let mut seen: Vec<Vec<u64>> = Vec::new();
    let mut out = Vec::new();
    for combo in 0..total {
        let mut rest = combo;
        let picks: Vec<usize> = free_arms
            .iter()
            .map(|_| {
                let k = rest % effects.len();
                rest /= effects.len();
                k
            })
            .collect();
        if dedup {
            let mut key: Vec<u64> = picks.iter().map(|&k| effects[k].to_bits()).collect();
            key.sort_unstable();
            if seen.contains(&key) {
                continue;
            }
            seen.push(key);
        }
        let mut offsets = vec![0.0; base.n_arms()];
        for (&arm, &k) in free_arms.iter().zip(&picks) {
            offsets[arm] = effects[k];
        }
        let model = shifted(base.outcome(), &offsets)?;
        let spec = base.with_outcome(model).map_err(|source| GridError::Invalid {
            label: format!("{offsets:?}"),
            source,
        })?;
        out.push(GridScenario {
            index: out.len() + 1,
            label: scenario_label(&spec),
            effects: offsets,
            spec,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::{fixtures::primary_null, validate_spec};

    const EFFECTS: [f64; 5] = [0.0, 0.025, -0.025, 0.05, -0.05];

    #[test]
    fn primary_grid_has_fifteen_unique_scenarios() {
        let base = validate_spec(&primary_null()).unwrap();
        let grid = scenario_grid(&base, &EFFECTS, &[1, 2]).unwrap();
        assert_eq!(grid.len(), 15);
        assert_eq!(grid[0].label, "A 25.0 - B 25.0 - C 25.0");
        assert_eq!(grid[1].label, "A 25.0 - B 27.5 - C 25.0");
        assert_eq!(grid[5].label, "A 25.0 - B 27.5 - C 27.5");
        let mut keys: Vec<Vec<u64>> = grid
            .iter()
            .map(|g| {
                let mut k = vec![g.effects[1].to_bits(), g.effects[2].to_bits()];
                k.sort_unstable();
                k
            })
            .collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), 15);
        assert_eq!(grid[3].seed(4131), 4135);
    }

    #[test]
    fn control_designs_keep_permutations() {
        let mut d = primary_null();
        d.control = Some("Arm A".into());
        let base = validate_spec(&d).unwrap();
        assert_eq!(scenario_grid(&base, &EFFECTS, &[1, 2]).unwrap().len(), 25);
    }
}
