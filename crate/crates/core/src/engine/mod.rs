//! Single-trial simulation: randomisation, lagged analyses, adaptive
//! decisions and the final all-participants analysis.

pub mod allocation;
pub mod probs;
mod trial;

use serde::{Deserialize, Serialize};

use crate::spec::TrialSpec;

pub use allocation::{fit_to_limits, rescale_limits, update_allocation};
pub use probs::{pairwise_vs_control, prob_all_equivalent, prob_best, prob_best_among, PairwiseProbs};
pub use trial::{
    evaluate_look_no_control, evaluate_look_with_control, run_trial, run_trial_traced, ArmResult,
    EngineError, FinalStatus, LookDecision, LookTrace, TrialResult, TrialState,
};

/// Arm-level status; every status other than `Active` and `Superior`
/// means the arm has been dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArmStatus {
    Active,
    Superior,
    Inferior,
    Equivalence,
    Futility,
}

/// Mutable per-arm state carried through a simulated trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmState {
    pub name: String,
    pub active: bool,
    pub is_control: bool,
    pub n_randomised: u64,
    pub sum_outcomes: f64,
    pub alloc_prob: f64,
    pub min_prob: Option<f64>,
    pub max_prob: Option<f64>,
    pub fixed_prob: Option<f64>,
    pub status: ArmStatus,
    pub status_look: Option<usize>,
}

impl ArmState {
    /// Arm states at trial start: all active, start probabilities and
    /// configured limits.
    pub fn initial(spec: &TrialSpec) -> Vec<ArmState> {
        (0..spec.n_arms())
            .map(|i| ArmState {
                name: spec.arms()[i].clone(),
                active: true,
                is_control: spec.control() == Some(i),
                n_randomised: 0,
                sum_outcomes: 0.0,
                alloc_prob: spec.start_probs()[i],
                min_prob: spec.min_probs()[i],
                max_prob: spec.max_probs()[i],
                fixed_prob: spec.fixed_probs()[i],
                status: ArmStatus::Active,
                status_look: None,
            })
            .collect()
    }
}
