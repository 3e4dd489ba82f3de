//! Response-adaptive allocation: softening, fixed/control rules and limits.

use super::ArmState;
use crate::spec::{sqrt_control_prob, ControlRule, RescaleMode, TrialSpec};

const MASS_TOL: f64 = 1e-12;

/// New allocation probabilities for every arm (zero for inactive arms).
///
/// `prob_best` holds one entry per active arm, in canonical order. The
/// pipeline softens the raw probabilities with the look's power, applies
/// fixed probabilities and the control rule, then fits the remaining mass
/// to the free arms' `[min, max]` limits. The limit step returns the fixed
/// point of clamp-and-renormalise, i.e. `clip(lambda * w_i, min_i, max_i)`
/// with `lambda` chosen so the free mass is used exactly.
pub fn update_allocation(
    arms: &[ArmState],
    control: Option<usize>,
    prob_best: &[f64],
    spec: &TrialSpec,
    look: usize,
) -> Vec<f64> {
    let n = arms.len();
    let active: Vec<usize> = (0..n).filter(|&i| arms[i].active).collect();
    assert_eq!(active.len(), prob_best.len(), "prob_best must cover active arms");
    let mut out = vec![0.0; n];
    match active.len() {
        0 => return out,
        1 => {
            out[active[0]] = 1.0;
            return out;
        }
        _ => {}
    }

    let power = spec.soften_power()[look];
    let mut weights: Vec<f64> = prob_best.iter().map(|&p| p.powf(power)).collect();
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        weights.iter_mut().for_each(|w| *w /= total);
    } else {
        weights.iter_mut().for_each(|w| *w = 1.0 / prob_best.len() as f64);
    }

    // Arms whose probability is set outright, and their values.
    let mut fixed: Vec<Option<f64>> = active.iter().map(|&i| arms[i].fixed_prob).collect();
    let control_pos = control.and_then(|c| active.iter().position(|&i| i == c));
    if let Some(cp) = control_pos {
        let k = active.len() - 1;
        match spec.control_prob_fixed() {
            ControlRule::None => {}
            ControlRule::SqrtBased => fixed[cp] = sqrt_control_prob(k),
            ControlRule::Match => {
                let top = weights
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != cp)
                    .map(|(_, &w)| w)
                    .fold(0.0, f64::max);
                let mut matched = weights.clone();
                matched[cp] = top;
                let s: f64 = matched.iter().sum();
                fixed[cp] = Some(if s > 0.0 { top / s } else { 1.0 / active.len() as f64 });
            }
        }
    }

    let fixed_mass: f64 = fixed.iter().flatten().sum();
    let free: Vec<usize> = (0..active.len()).filter(|&j| fixed[j].is_none()).collect();
    let mut probs = vec![0.0; active.len()];
    if free.is_empty() || fixed_mass >= 1.0 {
        // Everything fixed (or over-committed): renormalise the fixed values.
        let s = fixed_mass.max(f64::MIN_POSITIVE);
        for (j, f) in fixed.iter().enumerate() {
            probs[j] = f.unwrap_or(0.0) / s;
        }
    } else {
        for (j, f) in fixed.iter().enumerate() {
            if let Some(v) = f {
                probs[j] = *v;
            }
        }
        let w: Vec<f64> = free.iter().map(|&j| weights[j]).collect();
        let lo: Vec<f64> = free
            .iter()
            .map(|&j| arms[active[j]].min_prob.unwrap_or(0.0))
            .collect();
        let hi: Vec<f64> = free
            .iter()
            .map(|&j| arms[active[j]].max_prob.unwrap_or(1.0))
            .collect();
        let fitted = fit_to_limits(&w, &lo, &hi, 1.0 - fixed_mass);
        for (&j, p) in free.iter().zip(fitted) {
            probs[j] = p;
        }
    }

    let s: f64 = probs.iter().sum();
    for (&i, p) in active.iter().zip(probs) {
        out[i] = p / s;
    }
    out
}

/// Distributes `mass` over arms proportionally to `w`, clipped to
/// `[lo, hi]`. Infeasible bound systems are first scaled to the nearest
/// feasible one (mins shrunk or maxes stretched proportionally).
pub fn fit_to_limits(w: &[f64], lo: &[f64], hi: &[f64], mass: f64) -> Vec<f64> {
    let k = w.len();
    if k == 0 {
        return Vec::new();
    }
    let mut lo = lo.to_vec();
    let mut hi = hi.to_vec();
    let lo_sum: f64 = lo.iter().sum();
    if lo_sum > mass {
        lo.iter_mut().for_each(|l| *l *= mass / lo_sum);
        return lo;
    }
    let hi_sum: f64 = hi.iter().sum();
    if hi_sum < mass {
        hi.iter_mut().for_each(|h| *h *= mass / hi_sum);
        return hi;
    }

    let positive = w.iter().any(|&x| x > 0.0);
    let w: Vec<f64> = if positive { w.to_vec() } else { vec![1.0; k] };
    // Mass reachable through the weights alone; zero-weight arms sit at
    // their minimum unless the rest saturates.
    let reachable: f64 = (0..k).map(|i| if w[i] > 0.0 { hi[i] } else { lo[i] }).sum();
    if reachable + MASS_TOL < mass {
        let zero: Vec<usize> = (0..k).filter(|&i| w[i] <= 0.0).collect();
        let sub = fit_to_limits(
            &vec![1.0; zero.len()],
            &zero.iter().map(|&i| lo[i]).collect::<Vec<_>>(),
            &zero.iter().map(|&i| hi[i]).collect::<Vec<_>>(),
            mass - (0..k).filter(|&i| w[i] > 0.0).map(|i| hi[i]).sum::<f64>(),
        );
        let mut out: Vec<f64> = (0..k).map(|i| if w[i] > 0.0 { hi[i] } else { 0.0 }).collect();
        for (&i, v) in zero.iter().zip(sub) {
            out[i] = v;
        }
        return out;
    }

    let g = |lambda: f64| -> f64 {
        (0..k)
            .map(|i| (lambda * w[i]).clamp(lo[i], hi[i]))
            .sum()
    };
    let mut breaks: Vec<f64> = (0..k)
        .filter(|&i| w[i] > 0.0)
        .flat_map(|i| [lo[i] / w[i], hi[i] / w[i]])
        .collect();
    breaks.push(0.0);
    breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    breaks.dedup();

    let mut lambda = *breaks.last().expect("at least one breakpoint");
    let mut prev = (0.0, g(0.0));
    for &b in &breaks {
        let gb = g(b);
        if gb >= mass {
            let (b0, g0) = prev;
            lambda = if gb > g0 {
                b0 + (mass - g0) * (b - b0) / (gb - g0)
            } else {
                b
            };
            break;
        }
        prev = (b, gb);
    }
    (0..k)
        .map(|i| (lambda * w[i]).clamp(lo[i], hi[i]))
        .collect()
}

/// Rescales the remaining arms' limits after a drop.
///
/// With [`RescaleMode::Limits`] each active arm's configured min/max is
/// multiplied by `initial_active / current_active`; mins are capped at
/// `1 / current_active` and maxes at 1. Absent limits stay absent.
pub fn rescale_limits(arms: &mut [ArmState], spec: &TrialSpec, initial_active: usize) {
    if spec.rescale_probs() == RescaleMode::None {
        return;
    }
    let current = arms.iter().filter(|a| a.active).count();
    if current == 0 {
        return;
    }
    let factor = initial_active as f64 / current as f64;
    for (i, arm) in arms.iter_mut().enumerate() {
        if !arm.active {
            continue;
        }
        arm.min_prob = spec.min_probs()[i].map(|m| (m * factor).min(1.0 / current as f64));
        arm.max_prob = spec.max_probs()[i].map(|m| (m * factor).min(1.0));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ArmState;
    use crate::spec::fixtures::primary_null;
    use crate::spec::{validate_spec, PerLook, TrialDesign};

    fn spec_with(f: impl FnOnce(&mut TrialDesign)) -> TrialSpec {
        let mut d = primary_null();
        f(&mut d);
        validate_spec(&d).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn zero_power_gives_equal_allocation() {
        let spec = spec_with(|d| {
            d.soften_power = PerLook::Scalar(0.0);
            d.min_probs = None;
        });
        let arms = ArmState::initial(&spec);
        let p = update_allocation(&arms, None, &[0.6, 0.3, 0.1], &spec, 0);
        assert!(close(&p, &[1.0 / 3.0; 3], 1e-12));
    }

    #[test]
    fn square_root_softening() {
        let spec = spec_with(|d| d.min_probs = None);
        let arms = ArmState::initial(&spec);
        let p = update_allocation(&arms, None, &[0.6, 0.3, 0.1], &spec, 0);
        // sqrt(0.6), sqrt(0.3), sqrt(0.1) renormalised
        let s = 0.6f64.sqrt() + 0.3f64.sqrt() + 0.1f64.sqrt();
        let expected = [0.6f64.sqrt() / s, 0.3f64.sqrt() / s, 0.1f64.sqrt() / s];
        assert!(close(&p, &expected, 1e-12));
        assert!(close(&p, &[0.4727, 0.3343, 0.1930], 1e-4));
    }

    #[test]
    fn minimum_limits_clamp() {
        let spec = spec_with(|d| d.soften_power = PerLook::Scalar(1.0));
        let arms = ArmState::initial(&spec);
        let p = update_allocation(&arms, None, &[0.9, 0.05, 0.05], &spec, 0);
        assert!(close(&p, &[0.5, 0.25, 0.25], 1e-12));
    }

    #[test]
    fn max_limits_clamp() {
        let spec = spec_with(|d| {
            d.soften_power = PerLook::Scalar(1.0);
            d.min_probs = None;
            d.max_probs = Some(vec![Some(0.5), None, None]);
        });
        let arms = ArmState::initial(&spec);
        let p = update_allocation(&arms, None, &[0.8, 0.15, 0.05], &spec, 0);
        assert!(close(&p, &[0.5, 0.375, 0.125], 1e-12));
    }

    #[test]
    fn sqrt_control_rule() {
        let spec = spec_with(|d| {
            d.arms.push("Arm D".into());
            d.outcome = crate::outcome::OutcomeModel::binomial(vec![0.25; 4]);
            d.control = Some("Arm A".into());
            d.control_prob_fixed = ControlRule::SqrtBased;
            d.start_probs = crate::spec::StartProbs::Auto;
            d.min_probs = None;
            d.soften_power = PerLook::Scalar(1.0);
        });
        let arms = ArmState::initial(&spec);
        let p = update_allocation(&arms, Some(0), &[0.1, 0.45, 0.3, 0.15], &spec, 0);
        let pc = sqrt_control_prob(3).unwrap();
        assert!((p[0] - pc).abs() < 1e-12);
        let rest = 1.0 - pc;
        assert!(close(&p[1..], &[rest * 0.5, rest * 1.0 / 3.0, rest / 6.0], 1e-12));
    }

    #[test]
    fn match_control_rule() {
        let spec = spec_with(|d| {
            d.control = Some("Arm A".into());
            d.control_prob_fixed = ControlRule::Match;
            d.min_probs = None;
            d.soften_power = PerLook::Scalar(1.0);
        });
        let arms = ArmState::initial(&spec);
        let p = update_allocation(&arms, Some(0), &[0.2, 0.5, 0.3], &spec, 0);
        assert!(close(&p, &[0.5 / 1.3, 0.5 / 1.3, 0.3 / 1.3], 1e-12));
    }

    #[test]
    fn inactive_arms_get_nothing() {
        let spec = spec_with(|_| {});
        let mut arms = ArmState::initial(&spec);
        arms[1].active = false;
        let p = update_allocation(&arms, None, &[0.7, 0.3], &spec, 0);
        assert_eq!(p[1], 0.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rescaled_minimums() {
        let spec = spec_with(|_| {});
        let mut arms = ArmState::initial(&spec);
        arms[2].active = false;
        rescale_limits(&mut arms, &spec, 3);
        assert!((arms[0].min_prob.unwrap() - 0.375).abs() < 1e-12);
        assert!((arms[1].min_prob.unwrap() - 0.375).abs() < 1e-12);
        assert_eq!(arms[0].max_prob, None);

        let spec = spec_with(|d| d.rescale_probs = RescaleMode::None);
        let mut arms = ArmState::initial(&spec);
        arms[2].active = false;
        rescale_limits(&mut arms, &spec, 3);
        assert_eq!(arms[0].min_prob, Some(0.25));
    }

    #[test]
    fn fit_handles_infeasible_and_zero_weights() {
        let p = fit_to_limits(&[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0], &[0.5, 1.0, 1.0], 1.0);
        assert!(close(&p, &[0.5, 0.25, 0.25], 1e-12));
        let p = fit_to_limits(&[0.5, 0.5], &[0.6, 0.6], &[1.0, 1.0], 1.0);
        assert!(close(&p, &[0.5, 0.5], 1e-12));
        let p = fit_to_limits(&[0.0, 0.0], &[0.0, 0.0], &[1.0, 1.0], 1.0);
        assert!(close(&p, &[0.5, 0.5], 1e-12));
    }
}
