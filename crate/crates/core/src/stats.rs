//! Small order-statistic helpers shared by the engine and the metrics.

/// Scale factor turning a median absolute deviation into a normal-consistent SD.
pub const MAD_SCALE: f64 = 1.4826;

/// Quantile with inclusive linear interpolation between order statistics
/// (`h = (n - 1) q`). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted_copy(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Median, reordering `xs` in place.
pub fn median_in_place(xs: &mut [f64]) -> f64 {
    let n = xs.len();
    assert!(n > 0, "median of an empty sample");
    let mid = n / 2;
    let (left, m, _) = xs.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if n % 2 == 1 {
        upper
    } else {
        let lower = left.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

pub fn median(xs: &[f64]) -> f64 {
    median_in_place(&mut xs.to_vec())
}

/// Median and MAD-based SD of a sample.
pub fn median_mad_sd(xs: &[f64]) -> (f64, f64) {
    let mut buf = xs.to_vec();
    let med = median_in_place(&mut buf);
    for v in &mut buf {
        *v = (*v - med).abs();
    }
    (med, MAD_SCALE * median_in_place(&mut buf))
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample SD with an `n - 1` denominator; zero for fewer than two values.
pub fn sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}
