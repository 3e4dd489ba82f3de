//! CSV export of performance summaries and scenario tables.
//!
//! Numbers are written with Rust's shortest round-trip formatting; missing
//! values (absent metrics, uncertainty not computed) are left blank.

use std::path::Path;

use crate::metrics::{Metric, PerformanceSummary};
use crate::spec::TrialSpec;

pub type CsvResult<T> = Result<T, csv::Error>;

fn num(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v}"),
        Some(v) if v.is_nan() => "NaN".into(),
        Some(v) => if v > 0.0 { "Inf" } else { "-Inf" }.into(),
        None => String::new(),
    }
}

fn metric_cells(m: &Metric) -> [String; 5] {
    let u = m.uncertainty.as_ref();
    [
        num(m.est),
        num(u.map(|u| u.err_sd)),
        num(u.map(|u| u.err_mad)),
        num(u.map(|u| u.lo)),
        num(u.map(|u| u.hi)),
    ]
}

const METRIC_HEADER: [&str; 6] = ["metric", "est", "err_sd", "err_mad", "lo", "hi"];

/// One row per metric: `metric,est,err_sd,err_mad,lo,hi`.
pub fn write_metrics_csv<W: std::io::Write>(w: W, summary: &PerformanceSummary) -> CsvResult<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(METRIC_HEADER)?;
    for m in &summary.metrics {
        let cells = metric_cells(m);
        out.write_record(std::iter::once(m.name.as_str()).chain(cells.iter().map(String::as_str)))?;
    }
    out.flush()?;
    Ok(())
}

pub fn export_metrics_csv(path: &Path, summary: &PerformanceSummary) -> CsvResult<()> {
    write_metrics_csv(std::fs::File::create(path)?, summary)
}

/// Long-format metrics for several scenarios: `scenario` then the metric
/// columns. An empty list gives a header-only file.
pub fn write_scenario_metrics_csv<W: std::io::Write>(
    w: W,
    rows: &[(String, PerformanceSummary)],
) -> CsvResult<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(std::iter::once("scenario").chain(METRIC_HEADER))?;
    for (label, summary) in rows {
        for m in &summary.metrics {
            let cells = metric_cells(m);
            out.write_record(
                [label.as_str(), m.name.as_str()]
                    .into_iter()
                    .chain(cells.iter().map(String::as_str)),
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Compact per-scenario row: true values (as percentages for binary
/// outcomes, as given otherwise), expected size and the stopping
/// probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyResult {
    pub label: String,
    pub truth: Vec<f64>,
    pub size: Option<f64>,
    pub pr_concl: Option<f64>,
    pub pr_sup: Option<f64>,
    pub pr_equi: Option<f64>,
}

impl KeyResult {
    pub fn from_summary(label: &str, spec: &TrialSpec, summary: &PerformanceSummary) -> Self {
        let binary = matches!(
            spec.outcome(),
            crate::outcome::OutcomeModel::Binomial { .. }
                | crate::outcome::OutcomeModel::BinomialPooledPrior { .. }
        );
        let scale = if binary { 100.0 } else { 1.0 };
        Self {
            label: label.into(),
            truth: spec.true_ys().iter().map(|y| (y * scale * 1e10).round() / 1e10).collect(),
            size: summary.get("size_mean"),
            pr_concl: summary.get("prob_conclusive"),
            pr_sup: summary.get("prob_superior"),
            pr_equi: summary.get("prob_equivalence"),
        }
    }
}

fn short(name: &str) -> &str {
    name.strip_prefix("Arm ").unwrap_or(name)
}

/// Columns: one per arm (short names), then `size,pr_concl,pr_sup,pr_equi`.
pub fn write_key_results_csv<W: std::io::Write>(
    w: W,
    arms: &[String],
    rows: &[KeyResult],
) -> CsvResult<()> {
    let mut out = csv::Writer::from_writer(w);
    let header: Vec<&str> = arms
        .iter()
        .map(|a| short(a))
        .chain(["size", "pr_concl", "pr_sup", "pr_equi"])
        .collect();
    out.write_record(&header)?;
    for r in rows {
        let cells: Vec<String> = r
            .truth
            .iter()
            .map(|&t| num(Some(t)))
            .chain([r.size, r.pr_concl, r.pr_sup, r.pr_equi].map(num))
            .collect();
        out.write_record(&cells)?;
    }
    out.flush()?;
    Ok(())
}

/// `arms,probability` rows for the remaining-arm combinations.
pub fn write_combos_csv<W: std::io::Write>(
    w: W,
    arms: &[String],
    combos: &[(Vec<usize>, f64)],
) -> CsvResult<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["arms", "probability"])?;
    for (set, p) in combos {
        let names: Vec<&str> = set.iter().map(|&i| arms[i].as_str()).collect();
        out.write_record([names.join(" + "), num(Some(*p))])?;
    }
    out.flush()?;
    Ok(())
}
