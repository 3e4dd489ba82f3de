//! Plain-text reports for the terminal.

use std::fmt::Write;
use std::time::Duration;

use trialsim::calibration::CalibrationResult;
use trialsim::metrics::PerformanceSummary;

/// Formats `x` with up to seven significant digits, trailing zeros removed.
pub fn sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (6 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn duration(d: Duration) -> String {
    let s = d.as_secs_f64();
    if s >= 3600.0 {
        format!("{:.2} hours", s / 3600.0)
    } else if s >= 60.0 {
        format!("{:.2} mins", s / 60.0)
    } else {
        format!("{s:.2} secs")
    }
}

pub fn calibration_report(r: &CalibrationResult, elapsed: Duration) -> String {
    let s = &r.settings;
    let c = &s.controls;
    let yes = |b: bool| if b { "yes" } else { "no" };
    let (lo, hi) = s.band();
    let side = match s.dir {
        -1 => "at or below target",
        1 => "at or above target",
        _ => "either side of target",
    };
    let n_new = r.search.evaluations.len() - r.search.n_previous;
    let new_evals = &r.search.evaluations[r.search.n_previous..];
    let n_grid = new_evals
        .iter()
        .take(2)
        .filter(|(x, _)| *x == s.search_range.0 || *x == s.search_range.1)
        .count();
    let mut o = String::new();
    let _ = writeln!(o, "Trial calibration:");
    let _ = writeln!(
        o,
        "* Result: {}",
        if r.search.success { "calibration successful" } else { "calibration not successful" }
    );
    let _ = writeln!(o, "* Best x: {}", sig(r.search.best_x));
    let _ = writeln!(o, "* Best y: {}", sig(r.search.best_y));
    let _ = writeln!(o);
    let _ = writeln!(o, "Central settings:");
    let _ = writeln!(o, "* Target: {}", sig(s.target));
    let _ = writeln!(o, "* Tolerance: {} ({side}, range: {} to {})", sig(s.tol), sig(lo), sig(hi));
    let _ = writeln!(o, "* Search range: {} to {}", sig(s.search_range.0), sig(s.search_range.1));
    let _ = writeln!(o, "* Gaussian process controls:");
    let _ = writeln!(o, "* - resolution: {}", c.resolution);
    let _ = writeln!(o, "* - kappa: {}", sig(c.kappa));
    let _ = writeln!(o, "* - pow: {}", sig(c.pow));
    let _ = writeln!(o, "* - lengthscale: {} (constant)", sig(c.lengthscale));
    let _ = writeln!(o, "* - x scaled: {}", yes(c.x_scaled));
    let _ = writeln!(o, "* Noisy: no");
    let _ = writeln!(o, "* Narrowing: {}", yes(c.narrowing));
    let _ = writeln!(o);
    let _ = writeln!(o, "Calibration/simulation details:");
    let _ = writeln!(
        o,
        "* Total evaluations: {} ({} + {} + {}, previous + grid + iterations)",
        r.search.evaluations.len(),
        r.search.n_previous,
        n_grid,
        n_new - n_grid
    );
    let _ = writeln!(o, "* Repetitions: {}", r.n_rep);
    let _ = writeln!(o, "* Calibration time: {}", duration(elapsed));
    let _ = writeln!(o, "* Base random seed: {}", r.base_seed);
    o
}

pub fn metrics_table(summary: &PerformanceSummary) -> String {
    let width = summary.metrics.iter().map(|m| m.name.len()).max().unwrap_or(6);
    let mut o = String::new();
    let _ = writeln!(o, "{:width$}  {:>12}  {:>12}  {:>12}", "metric", "est", "lo", "hi");
    for m in &summary.metrics {
        let f = |x: Option<f64>| x.map(sig).unwrap_or_else(|| "NA".into());
        let (lo, hi) = match &m.uncertainty {
            Some(u) => (f(Some(u.lo)), f(Some(u.hi))),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(o, "{:width$}  {:>12}  {:>12}  {:>12}", m.name, f(m.est), lo, hi);
    }
    o
}
