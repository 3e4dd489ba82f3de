//! Decision probabilities as fractions of posterior draw rows.

use crate::outcome::PosteriorDraws;

/// Probability that each column is best, in column order.
///
/// Each row credits the column with the largest (or smallest, when lower is
/// better) value; ties go to the earliest column.
pub fn prob_best(draws: &PosteriorDraws, highest_is_best: bool) -> Vec<f64> {
    let cols: Vec<usize> = (0..draws.n_columns()).collect();
    prob_best_among(draws, &cols, highest_is_best)
}

/// [`prob_best`] restricted to the given column positions.
pub fn prob_best_among(draws: &PosteriorDraws, cols: &[usize], highest_is_best: bool) -> Vec<f64> {
    let k = cols.len();
    if k == 0 {
        return Vec::new();
    }
    if k == 1 {
        return vec![1.0];
    }
    let n = draws.n_draws();
    let columns: Vec<&[f64]> = cols.iter().map(|&c| draws.column(c)).collect();
    let mut wins = vec![0u64; k];
    // Orient so that larger is better.
    let sign = if highest_is_best { 1.0 } else { -1.0 };
    for row in 0..n {
        let mut best = 0;
        let mut best_val = sign * columns[0][row];
        for (j, col) in columns.iter().enumerate().skip(1) {
            let v = sign * col[row];
            if v > best_val {
                best = j;
                best_val = v;
            }
        }
        wins[best] += 1;
    }
    wins.iter().map(|&w| w as f64 / n as f64).collect()
}

/// Pairwise probabilities of one non-control column against the control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseProbs {
    pub p_superior: f64,
    pub p_equivalent: Option<f64>,
    pub p_futile: Option<f64>,
}

/// Compares `arm_col` against `control_col` row by row.
///
/// A row is superior when the arm beats the control strictly, equivalent
/// when the absolute difference is below `equivalence_diff`, and futile when
/// the arm's beneficial difference over the control is below `futility_diff`
/// (rows where the arm is worse count as futile).
pub fn pairwise_vs_control(
    draws: &PosteriorDraws,
    arm_col: usize,
    control_col: usize,
    equivalence_diff: Option<f64>,
    futility_diff: Option<f64>,
    highest_is_best: bool,
) -> PairwiseProbs {
    let arm = draws.column(arm_col);
    let ctrl = draws.column(control_col);
    let n = draws.n_draws() as f64;
    let sign = if highest_is_best { 1.0 } else { -1.0 };
    let (mut sup, mut equi, mut fut) = (0u64, 0u64, 0u64);
    let eq = equivalence_diff.unwrap_or(f64::NEG_INFINITY);
    let fd = futility_diff.unwrap_or(f64::NEG_INFINITY);
    for (&a, &c) in arm.iter().zip(ctrl) {
        let benefit = sign * (a - c);
        sup += (benefit > 0.0) as u64;
        equi += ((a - c).abs() < eq) as u64;
        fut += (benefit < fd) as u64;
    }
    PairwiseProbs {
        p_superior: sup as f64 / n,
        p_equivalent: equivalence_diff.map(|_| equi as f64 / n),
        p_futile: futility_diff.map(|_| fut as f64 / n),
    }
}

/// Fraction of rows in which the largest absolute difference between any
/// two of `cols` is below `equivalence_diff`. `None` with fewer than two
/// columns.
pub fn prob_all_equivalent(
    draws: &PosteriorDraws,
    cols: &[usize],
    equivalence_diff: f64,
) -> Option<f64> {
    if cols.len() < 2 {
        return None;
    }
    let columns: Vec<&[f64]> = cols.iter().map(|&c| draws.column(c)).collect();
    let n = draws.n_draws();
    let mut hits = 0u64;
    for row in 0..n {
        let mut lo = columns[0][row];
        let mut hi = lo;
        for col in &columns[1..] {
            let v = col[row];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        hits += (hi - lo < equivalence_diff) as u64;
    }
    Some(hits as f64 / n as f64)
}
