use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::allocation::{rescale_limits, update_allocation};
use super::probs::{pairwise_vs_control, prob_all_equivalent, prob_best_among};
use super::{ArmState, ArmStatus};
use crate::outcome::{
    posterior_beta_binomial, posterior_beta_pooled_prior, posterior_normal_from_summaries,
    ArmSummary, OutcomeError, OutcomeModel, PooledRange, PosteriorDraws,
};
use crate::spec::{LookOutOfRange, ThresholdSet, TrialSpec};
use crate::stats::median_mad_sd;
use crate::stochastic::{categorical_unchecked, RngStream};

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Outcome(#[from] OutcomeError),
    #[error(transparent)]
    Look(#[from] LookOutOfRange),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalStatus {
    Superiority,
    Equivalence,
    Futility,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LookDecision {
    Continue,
    Stop {
        status: FinalStatus,
        superior_arm: Option<usize>,
        /// Set when a control-free trial stopped because every other arm
        /// was dropped for inferiority.
        single_arm_remainder: bool,
    },
}

/// Per-arm outcome of one simulated trial, from the final analysis of all
/// randomised participants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub n: u64,
    pub sum_ys: f64,
    /// Event fraction or sample mean; absent for arms with no participants.
    pub raw_estimate: Option<f64>,
    /// Median of the final posterior draws.
    pub posterior_estimate: f64,
    pub posterior_mad_sd: f64,
    pub status: ArmStatus,
    pub status_look: Option<usize>,
    /// Probability of being best among arms still active at the end.
    pub final_prob_best: Option<f64>,
}

/// Diagnostics recorded after the decisions at one look.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookTrace {
    pub look: usize,
    pub n_analysed: usize,
    pub n_randomised: usize,
    pub active: Vec<bool>,
    pub control: Option<usize>,
    pub prob_best: Vec<Option<f64>>,
    pub alloc_probs: Vec<f64>,
    pub min_probs: Vec<Option<f64>>,
    pub max_probs: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub final_status: FinalStatus,
    pub superior_arm: Option<usize>,
    pub single_arm_remainder: bool,
    /// Zero-based index of the look at which the trial ended.
    pub final_look: usize,
    pub n_randomised_total: u64,
    /// Current control when the trial ended (differs from the design's
    /// control after promotions).
    pub final_control: Option<usize>,
    pub arms: Vec<ArmResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<LookTrace>>,
}

impl TrialResult {
    pub fn is_active_at_end(&self, arm: usize) -> bool {
        matches!(self.arms[arm].status, ArmStatus::Active | ArmStatus::Superior)
    }

    pub fn active_at_end(&self) -> Vec<usize> {
        (0..self.arms.len()).filter(|&a| self.is_active_at_end(a)).collect()
    }
}

/// Arms plus the control bookkeeping that decisions mutate.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialState {
    pub arms: Vec<ArmState>,
    pub control: Option<usize>,
    pub promotions: usize,
    pub last_drop: Option<ArmStatus>,
}

impl TrialState {
    pub fn new(spec: &TrialSpec) -> Self {
        Self {
            arms: ArmState::initial(spec),
            control: spec.control(),
            promotions: 0,
            last_drop: None,
        }
    }

    pub fn active(&self) -> Vec<usize> {
        (0..self.arms.len()).filter(|&i| self.arms[i].active).collect()
    }

    fn drop_arm(&mut self, arm: usize, status: ArmStatus, look: usize) {
        let a = &mut self.arms[arm];
        a.active = false;
        a.alloc_prob = 0.0;
        a.is_control = false;
        a.status = status;
        a.status_look = Some(look);
        self.last_drop = Some(status);
    }

    fn comparators(&self) -> Vec<usize> {
        self.active()
            .into_iter()
            .filter(|&i| Some(i) != self.control)
            .collect()
    }

    fn columns(draws: &PosteriorDraws, arms: &[usize]) -> Vec<usize> {
        arms.iter()
            .map(|&a| draws.position(a).expect("active arms are analysed"))
            .collect()
    }
}

/// Decisions for a design without a common control.
///
/// Superiority on the overall probability of being best comes first, then
/// inferiority drops; a lone survivor is declared superior. Equivalence of
/// all remaining arms is checked last.
pub fn evaluate_look_no_control(
    state: &mut TrialState,
    draws: &PosteriorDraws,
    th: &ThresholdSet,
    spec: &TrialSpec,
    look: usize,
) -> LookDecision {
    let hib = spec.highest_is_best();
    let active = state.active();
    let cols = TrialState::columns(draws, &active);
    let pb = prob_best_among(draws, &cols, hib);

    let (top, top_p) = pb
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (j, &p)| if p > acc.1 { (j, p) } else { acc });
    if top_p > th.superiority {
        state.arms[active[top]].status = ArmStatus::Superior;
        state.arms[active[top]].status_look = Some(look);
        return LookDecision::Stop {
            status: FinalStatus::Superiority,
            superior_arm: Some(active[top]),
            single_arm_remainder: false,
        };
    }

    let mut to_drop: Vec<usize> = (0..active.len()).filter(|&j| pb[j] < th.inferiority).collect();
    if to_drop.len() == active.len() {
        to_drop.retain(|&j| j != top);
    }
    for &j in &to_drop {
        state.drop_arm(active[j], ArmStatus::Inferior, look);
    }
    let remaining = state.active();
    if remaining.len() == 1 {
        let arm = remaining[0];
        state.arms[arm].status = ArmStatus::Superior;
        state.arms[arm].status_look = Some(look);
        return LookDecision::Stop {
            status: FinalStatus::Superiority,
            superior_arm: Some(arm),
            single_arm_remainder: true,
        };
    }

    if let (Some(rule), Some(p_eq)) = (spec.equivalence(), th.equivalence_prob) {
        let cols = TrialState::columns(draws, &remaining);
        if prob_all_equivalent(draws, &cols, rule.diff).is_some_and(|p| p > p_eq) {
            return LookDecision::Stop {
                status: FinalStatus::Equivalence,
                superior_arm: None,
                single_arm_remainder: false,
            };
        }
    }
    LookDecision::Continue
}

/// Decisions for a design with a common control.
///
/// Every comparator is tested against the current control for superiority
/// and inferiority. When any comparator is superior, the one with the
/// highest probability of being best replaces the control (which is dropped)
/// and the superiority/inferiority comparisons are repeated against the new
/// control. Equivalence and then futility drops follow.
pub fn evaluate_look_with_control(
    state: &mut TrialState,
    draws: &PosteriorDraws,
    th: &ThresholdSet,
    spec: &TrialSpec,
    look: usize,
) -> LookDecision {
    let hib = spec.highest_is_best();
    loop {
        let ctrl = state.control.expect("control configured");
        let ctrl_col = draws.position(ctrl).expect("control analysed");
        let mut superior = Vec::new();
        for arm in state.comparators() {
            let col = draws.position(arm).expect("active arms are analysed");
            let p = pairwise_vs_control(draws, col, ctrl_col, None, None, hib).p_superior;
            if p > th.superiority {
                superior.push(arm);
            } else if p < th.inferiority {
                state.drop_arm(arm, ArmStatus::Inferior, look);
            }
        }
        if superior.is_empty() {
            break;
        }
        let active = state.active();
        let pb = prob_best_among(draws, &TrialState::columns(draws, &active), hib);
        let score = |arm: usize| pb[active.iter().position(|&a| a == arm).unwrap()];
        let winner = superior
            .iter()
            .copied()
            .fold(None, |best: Option<usize>, arm| match best {
                Some(b) if score(b) >= score(arm) => Some(b),
                _ => Some(arm),
            })
            .unwrap();
        state.drop_arm(ctrl, ArmStatus::Inferior, look);
        state.control = Some(winner);
        state.arms[winner].is_control = true;
        state.promotions += 1;
    }

    for (rule, p_th, status) in [
        (spec.equivalence(), th.equivalence_prob, ArmStatus::Equivalence),
        (spec.futility(), th.futility_prob, ArmStatus::Futility),
    ] {
        let (Some(rule), Some(p_th)) = (rule, p_th) else {
            continue;
        };
        if rule.only_first && state.promotions > 0 {
            continue;
        }
        let ctrl = state.control.unwrap();
        let ctrl_col = draws.position(ctrl).unwrap();
        for arm in state.comparators() {
            let col = draws.position(arm).unwrap();
            let (eq, fut) = match status {
                ArmStatus::Equivalence => (Some(rule.diff), None),
                _ => (None, Some(rule.diff)),
            };
            let p = pairwise_vs_control(draws, col, ctrl_col, eq, fut, hib);
            let prob = p.p_equivalent.or(p.p_futile).unwrap();
            if prob > p_th {
                state.drop_arm(arm, status, look);
            }
        }
    }

    if state.comparators().is_empty() {
        let ctrl = state.control.unwrap();
        let status = match state.last_drop {
            Some(ArmStatus::Equivalence) => FinalStatus::Equivalence,
            Some(ArmStatus::Futility) => FinalStatus::Futility,
            _ => FinalStatus::Superiority,
        };
        let superior_arm = (status == FinalStatus::Superiority).then_some(ctrl);
        if superior_arm.is_some() {
            state.arms[ctrl].status = ArmStatus::Superior;
            state.arms[ctrl].status_look = Some(look);
        }
        return LookDecision::Stop {
            status,
            superior_arm,
            single_arm_remainder: false,
        };
    }
    LookDecision::Continue
}

/// Running per-arm sufficient statistics over a prefix of participants.
struct DataSummary {
    n: Vec<u64>,
    sum: Vec<f64>,
    stats: Vec<ArmSummary>,
    total_n: u64,
    total_sum: f64,
    min: f64,
    max: f64,
    cursor: usize,
}

impl DataSummary {
    fn new(n_arms: usize) -> Self {
        Self {
            n: vec![0; n_arms],
            sum: vec![0.0; n_arms],
            stats: vec![ArmSummary::default(); n_arms],
            total_n: 0,
            total_sum: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            cursor: 0,
        }
    }

    fn advance(&mut self, allocs: &[usize], ys: &[f64], upto: usize, track_spread: bool) {
        for (&a, &y) in allocs[self.cursor..upto].iter().zip(&ys[self.cursor..upto]) {
            self.n[a] += 1;
            self.sum[a] += y;
            self.total_n += 1;
            self.total_sum += y;
            if track_spread {
                self.stats[a].push(y);
                self.min = self.min.min(y);
                self.max = self.max.max(y);
            }
        }
        self.cursor = upto.max(self.cursor);
    }

    fn posterior(
        &self,
        model: &OutcomeModel,
        arms: &[usize],
        n_draws: usize,
        rng: &mut RngStream,
    ) -> Result<PosteriorDraws, OutcomeError> {
        let events: Vec<u64> = arms.iter().map(|&a| self.sum[a] as u64).collect();
        let n: Vec<u64> = arms.iter().map(|&a| self.n[a]).collect();
        match model {
            OutcomeModel::Binomial { prior, .. } => {
                posterior_beta_binomial(arms, &events, &n, *prior, n_draws, rng)
            }
            OutcomeModel::BinomialPooledPrior { prior_sd, .. } => posterior_beta_pooled_prior(
                arms,
                &events,
                &n,
                self.total_sum as u64,
                self.total_n,
                *prior_sd,
                n_draws,
                rng,
            ),
            OutcomeModel::Normal { .. } | OutcomeModel::HurdleBetaDays { .. } => {
                if self.total_n == 0 {
                    return Err(OutcomeError::NoData);
                }
                let pooled = PooledRange {
                    mean: self.total_sum / self.total_n as f64,
                    min: self.min,
                    max: self.max,
                };
                let summaries: Vec<ArmSummary> = arms.iter().map(|&a| self.stats[a]).collect();
                posterior_normal_from_summaries(arms, &summaries, pooled, n_draws, rng)
            }
        }
    }
}

/// Simulates one trial. A pure function of `(spec, rng)`.
pub fn run_trial(spec: &TrialSpec, rng: &mut RngStream) -> Result<TrialResult, EngineError> {
    simulate(spec, rng, false)
}

/// [`run_trial`] that also records a per-look allocation trace. Consumes
/// the stream identically, so results match the untraced run.
pub fn run_trial_traced(spec: &TrialSpec, rng: &mut RngStream) -> Result<TrialResult, EngineError> {
    simulate(spec, rng, true)
}

fn simulate(spec: &TrialSpec, rng: &mut RngStream, traced: bool) -> Result<TrialResult, EngineError> {
    let n_arms = spec.n_arms();
    let model = spec.outcome();
    let generator = model.generator()?;
    let track_spread = !model.is_binary();
    let hib = spec.highest_is_best();

    let mut state = TrialState::new(spec);
    let mut allocs: Vec<usize> = Vec::with_capacity(spec.max_n());
    let mut ys: Vec<f64> = Vec::with_capacity(spec.max_n());
    let mut data = DataSummary::new(n_arms);
    let mut probs: Vec<f64> = state.arms.iter().map(|a| a.alloc_prob).collect();
    let mut trace = traced.then(Vec::new);
    let mut outcome = None;
    let mut final_look = spec.n_looks() - 1;

    for look in 0..spec.n_looks() {
        let target = spec.randomised_at_looks()[look];
        let total: f64 = probs.iter().sum();
        while allocs.len() < target {
            let arm = categorical_unchecked(rng, &probs, total);
            allocs.push(arm);
            ys.push(generator.sample(arm, rng));
        }

        let n_data = spec.data_looks()[look].min(allocs.len());
        data.advance(&allocs, &ys, n_data, track_spread);
        let active = state.active();
        let draws = data.posterior(model, &active, spec.n_draws(), rng)?;
        let th = spec.thresholds_at_look(look)?;
        let before = active.len();
        let decision = if state.control.is_some() {
            evaluate_look_with_control(&mut state, &draws, &th, spec, look)
        } else {
            evaluate_look_no_control(&mut state, &draws, &th, spec, look)
        };
        if let LookDecision::Stop {
            status,
            superior_arm,
            single_arm_remainder,
        } = decision
        {
            outcome = Some((status, superior_arm, single_arm_remainder));
            final_look = look;
            break;
        }

        let remaining = state.active();
        if remaining.len() < before {
            rescale_limits(&mut state.arms, spec, n_arms);
        }
        let pb = prob_best_among(&draws, &TrialState::columns(&draws, &remaining), hib);
        probs = update_allocation(&state.arms, state.control, &pb, spec, look);
        for (arm, &p) in state.arms.iter_mut().zip(&probs) {
            arm.alloc_prob = p;
        }
        if let Some(t) = trace.as_mut() {
            let mut pb_all = vec![None; n_arms];
            for (&a, &p) in remaining.iter().zip(&pb) {
                pb_all[a] = Some(p);
            }
            t.push(LookTrace {
                look,
                n_analysed: n_data,
                n_randomised: allocs.len(),
                active: state.arms.iter().map(|a| a.active).collect(),
                control: state.control,
                prob_best: pb_all,
                alloc_probs: probs.clone(),
                min_probs: state.arms.iter().map(|a| a.min_prob).collect(),
                max_probs: state.arms.iter().map(|a| a.max_prob).collect(),
            });
        }
    }

    // Final analysis of everyone randomised, for every arm.
    data.advance(&allocs, &ys, allocs.len(), track_spread);
    let all: Vec<usize> = (0..n_arms).collect();
    let draws = data.posterior(model, &all, spec.n_draws(), rng)?;
    let end_active: Vec<usize> = (0..n_arms)
        .filter(|&a| matches!(state.arms[a].status, ArmStatus::Active | ArmStatus::Superior))
        .collect();
    let pb = prob_best_among(&draws, &end_active, hib);

    let arms = (0..n_arms)
        .map(|a| {
            let (median, mad_sd) = median_mad_sd(draws.column(a));
            let n = data.n[a];
            ArmResult {
                n,
                sum_ys: data.sum[a],
                raw_estimate: (n > 0).then(|| data.sum[a] / n as f64),
                posterior_estimate: median,
                posterior_mad_sd: mad_sd,
                status: state.arms[a].status,
                status_look: state.arms[a].status_look,
                final_prob_best: end_active.iter().position(|&x| x == a).map(|j| pb[j]),
            }
        })
        .collect();

    let (final_status, superior_arm, single_arm_remainder) =
        outcome.unwrap_or((FinalStatus::Max, None, false));
    Ok(TrialResult {
        final_status,
        superior_arm,
        single_arm_remainder,
        final_look,
        n_randomised_total: allocs.len() as u64,
        final_control: state.control,
        arms,
        trace,
    })
}
