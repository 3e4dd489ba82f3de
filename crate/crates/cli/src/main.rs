mod report;
mod session;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use trialsim::calibration::{self, best_evaluation, CalibrationSettings, CalibrationStore, GpControls};
use trialsim::io::export::{
    export_metrics_csv, write_combos_csv, write_key_results_csv, write_scenario_metrics_csv, KeyResult,
};
use trialsim::io::store::{read_batch, write_batch, RunManifest, ENGINE_VERSION};
use trialsim::io::{parse_config, run_batch, scenario_grid, SpecSet};
use trialsim::metrics::{
    remaining_arm_combos, summarize_batch, summarize_batch_with_uncertainty, PerformanceSummary,
    SelectionStrategy, SummaryOptions,
};
use trialsim::par::with_workers;
use trialsim::spec::TrialSpec;
use trialsim::stochastic::{derive_stream, BOOTSTRAP_STREAM_BASE};

use session::SessionLog;

#[derive(Parser)]
#[command(name = "trialsim", version, about = "Simulate and calibrate Bayesian adaptive trial designs")]
struct Cli {
    /// Append a JSON line per invocation to this file (defaults to
    /// `session.log` inside the output directory, when there is one).
    #[arg(long, global = true)]
    log: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a design file and print a short description.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Simulate a design and summarise performance.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        design: DesignArgs,
        #[command(flatten)]
        summary: SummaryArgs,
    },
    /// Calibrate the superiority threshold to a target superiority probability.
    Calibrate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 0.05)]
        target: f64,
        #[arg(long, default_value_t = 0.001)]
        tol: f64,
        /// -1 accepts only values at or below the target, 1 only at or above.
        #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
        dir: i8,
        /// Search range as `lower,upper`.
        #[arg(long, default_value = "0.9,1.0", value_parser = parse_range)]
        range: (f64, f64),
        #[arg(long, default_value_t = 25)]
        iter_max: usize,
        #[command(flatten)]
        summary: SummaryArgs,
    },
    /// Run a scenario grid (or the config's scenario blocks) and write a key results table.
    Scenarios {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        design: DesignArgs,
        /// Comma-separated offsets added to the truth of each free arm.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        effects: Option<Vec<f64>>,
        /// Comma-separated names of the arms the offsets apply to
        /// (default: every arm except the first).
        #[arg(long, value_delimiter = ',')]
        free_arms: Option<Vec<String>>,
        /// Batch file to use for the scenario equal to the base truth,
        /// simulated with the base seed (e.g. the calibrated batch).
        #[arg(long)]
        null_batch: Option<PathBuf>,
        #[command(flatten)]
        summary: SummaryArgs,
    },
    /// Recompute performance metrics from a stored batch.
    Metrics {
        #[arg(long)]
        batch: PathBuf,
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        config: PathBuf,
        /// Seed for the bootstrap streams (defaults to the batch seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        summary: SummaryArgs,
    },
    /// Tabulate which arms remained active at the end of each trial.
    Combos {
        #[arg(long)]
        batch: PathBuf,
        #[command(flatten)]
        design: DesignArgs,
        #[arg(long)]
        config: PathBuf,
        /// Output CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Number of simulated trials (default: `[run] n_rep`, else 1000).
    #[arg(long)]
    n_rep: Option<usize>,
    /// Base random seed (default: `[run] base_seed`, else 1).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every available core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output directory for batches, tables and the session log.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct DesignArgs {
    /// Use the 1-based scenario block from the config instead of the base design.
    #[arg(long)]
    scenario: Option<usize>,
    /// Replace superiority and inferiority by `x` and `1 - x` at every look.
    #[arg(long, conflicts_with = "calibrated")]
    superiority: Option<f64>,
    /// Take the threshold from a saved calibration (its best evaluation).
    #[arg(long)]
    calibrated: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SummaryArgs {
    /// none, best, control, or a comma-separated list of arm names.
    #[arg(long)]
    select_strategy: Option<String>,
    /// Bootstrap resamples for uncertainty (0 disables).
    #[arg(long, default_value_t = 0)]
    boot: usize,
    #[arg(long, default_value_t = 0.95)]
    ci_width: f64,
    /// Use raw estimates rather than posterior medians for error metrics.
    #[arg(long)]
    raw_estimates: bool,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [a, b] => {
            let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
            let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
            Ok((a, b))
        }
        _ => Err("expected `lower,upper`".into()),
    }
}

const DEFAULT_N_REP: usize = 1000;
const DEFAULT_SEED: u64 = 1;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let started = Instant::now();
    let mut log = SessionLog::new(std::env::args().collect());
    let (result, out_dir) = match cli.command {
        Command::Validate { config } => (cmd_validate(&config), None),
        Command::Simulate { run, design, summary } => {
            let out = run.out.clone();
            (cmd_simulate(&run, &design, &summary, &mut log), out)
        }
        Command::Calibrate {
            run,
            target,
            tol,
            dir,
            range,
            iter_max,
            summary,
        } => {
            let settings = CalibrationSettings {
                target,
                tol,
                dir,
                search_range: range,
                iter_max,
                controls: GpControls::default(),
            };
            let out = run.out.clone();
            (cmd_calibrate(&run, settings, &summary, &mut log), out)
        }
        Command::Scenarios {
            run,
            design,
            effects,
            free_arms,
            null_batch,
            summary,
        } => {
            let out = run.out.clone();
            let grid = GridArgs {
                effects,
                free_arms,
                null_batch,
            };
            (cmd_scenarios(&run, &design, &grid, &summary, &mut log), out)
        }
        Command::Metrics {
            batch,
            design,
            config,
            seed,
            out,
            summary,
        } => (cmd_metrics(&batch, &config, &design, seed, out.as_deref(), &summary, &mut log), None),
        Command::Combos {
            batch,
            design,
            config,
            out,
        } => (cmd_combos(&batch, &config, &design, out.as_deref()), None),
    };
    log.finish(started.elapsed(), result.as_ref().err().map(|e| format!("{e:#}")));
    let log_path = cli.log.or_else(|| out_dir.map(|d| d.join("session.log")));
    if let Some(path) = log_path {
        if let Err(e) = log.append_to(&path) {
            eprintln!("warning: could not write session log {}: {e}", path.display());
        }
    }
    result
}

fn load(config: &Path) -> Result<SpecSet> {
    parse_config(config).with_context(|| format!("reading {}", config.display()))
}

fn run_settings(set: &SpecSet, run: &RunArgs) -> (usize, u64) {
    let n_rep = run.n_rep.or(set.run.n_rep).unwrap_or(DEFAULT_N_REP);
    let seed = run.seed.or(set.run.base_seed).unwrap_or(DEFAULT_SEED);
    (n_rep, seed)
}

/// Applies scenario and threshold flags. Returns the spec and its label.
fn chosen_spec(set: &SpecSet, design: &DesignArgs) -> Result<(TrialSpec, String)> {
    let (mut spec, mut label) = match design.scenario {
        None => (set.base.clone(), set.label.clone().unwrap_or_else(|| "base design".into())),
        Some(i) if i >= 1 && i <= set.scenarios.len() => {
            let s = &set.scenarios[i - 1];
            (s.spec.clone(), s.label.clone())
        }
        Some(i) => bail!("scenario {i} does not exist (the config has {})", set.scenarios.len()),
    };
    let threshold = match (&design.superiority, &design.calibrated) {
        (Some(x), _) => Some(*x),
        (None, Some(path)) => Some(calibrated_threshold(path)?),
        (None, None) => None,
    };
    if let Some(x) = threshold {
        spec = spec.with_symmetric_thresholds(x)?;
        label = format!("{label} (superiority {x})");
    }
    Ok((spec, label))
}

fn calibrated_threshold(path: &Path) -> Result<f64> {
    let text = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let store: CalibrationStore = serde_json::from_slice(&text)?;
    let (x, _) = best_evaluation(&store.evaluations, &store.settings)
        .with_context(|| format!("{} holds no evaluations", path.display()))?;
    Ok(x)
}

fn summary_options(spec: &TrialSpec, args: &SummaryArgs, set: &SpecSet) -> Result<SummaryOptions> {
    let text = args
        .select_strategy
        .as_deref()
        .or(set.run.select_strategy.as_deref())
        .unwrap_or("none");
    let mut opts = SummaryOptions::new(SelectionStrategy::parse(text, spec)?);
    opts.raw_estimates = args.raw_estimates;
    Ok(opts)
}

fn summarise(
    results: &[trialsim::engine::TrialResult],
    spec: &TrialSpec,
    opts: &SummaryOptions,
    args: &SummaryArgs,
    seed: u64,
) -> Result<PerformanceSummary> {
    if args.boot == 0 {
        return Ok(summarize_batch(results, spec, opts)?);
    }
    let mut rng = derive_stream(seed, BOOTSTRAP_STREAM_BASE);
    Ok(summarize_batch_with_uncertainty(results, spec, opts, args.boot, args.ci_width, &mut rng)?)
}

fn ensure_dir(dir: &Option<PathBuf>) -> Result<()> {
    if let Some(d) = dir {
        std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    Ok(())
}

fn cmd_validate(config: &Path) -> Result<()> {
    let set = load(config)?;
    let spec = &set.base;
    println!("design OK: {}", set.label.as_deref().unwrap_or("(unlabelled)"));
    println!("  arms: {}", spec.arms().join(", "));
    if let Some(c) = spec.control() {
        println!("  control: {}", spec.arms()[c]);
    }
    println!(
        "  looks: {} (first {}, last {})",
        spec.n_looks(),
        spec.data_looks()[0],
        spec.max_n()
    );
    println!("  scenarios: {}", set.scenarios.len());
    println!("  fingerprint: {}", spec.fingerprint());
    Ok(())
}

fn cmd_simulate(run: &RunArgs, design: &DesignArgs, args: &SummaryArgs, log: &mut SessionLog) -> Result<()> {
    let set = load(&run.config)?;
    let (spec, label) = chosen_spec(&set, design)?;
    let (n_rep, seed) = run_settings(&set, run);
    ensure_dir(&run.out)?;
    let batch_path = run.out.as_ref().map(|d| d.join("batch.jsonl"));
    log.note_run(&label, n_rep, seed, &spec.fingerprint());
    let t = Instant::now();
    let batch = with_workers(run.workers, || run_batch(&spec, n_rep, seed, batch_path.as_deref(), Some(&label)))?;
    log.note_executed(batch.n_executed, t.elapsed());
    eprintln!("{label}: {} simulations ({} new)", n_rep, batch.n_executed);

    let opts = summary_options(&spec, args, &set)?;
    let summary = with_workers(run.workers, || summarise(&batch.results, &spec, &opts, args, seed))?;
    print!("{}", report::metrics_table(&summary));
    if let Some(d) = &run.out {
        export_metrics_csv(&d.join("metrics.csv"), &summary)?;
    }
    Ok(())
}

fn cmd_calibrate(
    run: &RunArgs,
    settings: CalibrationSettings,
    args: &SummaryArgs,
    log: &mut SessionLog,
) -> Result<()> {
    let set = load(&run.config)?;
    let spec = set.base.clone();
    let (n_rep, seed) = run_settings(&set, run);
    ensure_dir(&run.out)?;
    let store_path = run.out.as_ref().map(|d| d.join("calibration.json"));
    let mut store = CalibrationStore::new(&spec, &settings, n_rep, seed);
    if let Some(p) = &store_path {
        if let Some(saved) = CalibrationStore::load_matching(p, &store)? {
            eprintln!("resuming with {} saved evaluations", saved.evaluations.len());
            store = saved;
        }
    }
    log.note_run("calibration", n_rep, seed, &spec.fingerprint());
    let previous = store.evaluations.clone();
    let t = Instant::now();
    let mut save_error = None;
    let result = with_workers(run.workers, || {
        calibration::calibrate(&spec, &settings, n_rep, seed, &previous, |x, y| {
            eprintln!("  evaluated x = {x}: y = {y}");
            store.evaluations.push((x, y));
            if let Some(p) = &store_path {
                if let Err(e) = store.save(p) {
                    save_error.get_or_insert(e);
                }
            }
        })
    })?;
    if let Some(e) = save_error {
        return Err(e).context("saving calibration progress");
    }
    let elapsed = t.elapsed();
    log.note_executed((result.search.evaluations.len() - result.search.n_previous) * n_rep, elapsed);
    print!("{}", report::calibration_report(&result, elapsed));

    if let Some(d) = &run.out {
        let manifest = RunManifest {
            fingerprint: result.best_trial_spec.fingerprint(),
            n_rep,
            base_seed: seed,
            engine_version: ENGINE_VERSION.into(),
            label: Some("calibrated".into()),
        };
        write_batch(&d.join("calibrated_batch.jsonl"), &manifest, &result.best_batch)?;
        let opts = summary_options(&result.best_trial_spec, args, &set)?;
        let summary = with_workers(run.workers, || {
            summarise(&result.best_batch, &result.best_trial_spec, &opts, args, seed)
        })?;
        export_metrics_csv(&d.join("calibrated_metrics.csv"), &summary)?;
        std::fs::write(d.join("calibration_report.txt"), report::calibration_report(&result, elapsed))?;
    }
    Ok(())
}

struct GridArgs {
    effects: Option<Vec<f64>>,
    free_arms: Option<Vec<String>>,
    null_batch: Option<PathBuf>,
}

fn cmd_scenarios(
    run: &RunArgs,
    design: &DesignArgs,
    grid: &GridArgs,
    args: &SummaryArgs,
    log: &mut SessionLog,
) -> Result<()> {
    let set = load(&run.config)?;
    if design.scenario.is_some() {
        bail!("--scenario selects one scenario; use `simulate` for that");
    }
    let (base, _) = chosen_spec(&set, design)?;
    let (n_rep, seed) = run_settings(&set, run);
    ensure_dir(&run.out)?;

    // (index, label, spec): index 0 marks the base truth, which uses the base seed.
    let mut list: Vec<(usize, String, TrialSpec)> = Vec::new();
    if let Some(effects) = &grid.effects {
        let free: Vec<usize> = match &grid.free_arms {
            Some(names) => names
                .iter()
                .map(|n| base.arm_index(n.trim()).with_context(|| format!("unknown arm {n:?}")))
                .collect::<Result<_>>()?,
            None => (1..base.n_arms()).collect(),
        };
        for g in scenario_grid(&base, effects, &free)? {
            let null = g.effects.iter().all(|&e| e == 0.0);
            list.push((if null { 0 } else { g.index }, g.label, g.spec));
        }
    } else {
        for (i, s) in set.scenarios.iter().enumerate() {
            let spec = match design.superiority.or(match &design.calibrated {
                Some(p) => Some(calibrated_threshold(p)?),
                None => None,
            }) {
                Some(x) => s.spec.with_symmetric_thresholds(x)?,
                None => s.spec.clone(),
            };
            let null = spec.true_ys() == base.true_ys();
            list.push((if null { 0 } else { i + 1 }, s.label.clone(), spec));
        }
    }
    if list.is_empty() {
        bail!("no scenarios: pass --effects or add [[scenario]] blocks to the config");
    }

    let mut key_rows = Vec::new();
    let mut metric_rows = Vec::new();
    for (index, label, spec) in &list {
        let scenario_seed = seed + *index as u64;
        let path = if *index == 0 && grid.null_batch.is_some() {
            grid.null_batch.clone()
        } else {
            run.out.as_ref().map(|d| d.join(format!("scenario_{index:02}.jsonl")))
        };
        log.note_run(label, n_rep, scenario_seed, &spec.fingerprint());
        let t = Instant::now();
        let batch = with_workers(run.workers, || {
            run_batch(spec, n_rep, scenario_seed, path.as_deref(), Some(label))
        })
        .with_context(|| format!("scenario {label}"))?;
        log.note_executed(batch.n_executed, t.elapsed());
        let opts = summary_options(spec, args, &set)?;
        let summary = with_workers(run.workers, || summarise(&batch.results, spec, &opts, args, scenario_seed))?;
        let row = KeyResult::from_summary(label, spec, &summary);
        eprintln!(
            "{label}: size {:.1}, conclusive {:.3}, superior {:.3}, equivalence {:.3} ({} new sims)",
            row.size.unwrap_or(f64::NAN),
            row.pr_concl.unwrap_or(f64::NAN),
            row.pr_sup.unwrap_or(f64::NAN),
            row.pr_equi.unwrap_or(f64::NAN),
            batch.n_executed
        );
        key_rows.push(row);
        metric_rows.push((label.clone(), summary));
    }
    write_key_results_csv(std::io::stdout().lock(), base.arms(), &key_rows)?;
    if let Some(d) = &run.out {
        write_key_results_csv(std::fs::File::create(d.join("key_results.csv"))?, base.arms(), &key_rows)?;
        write_scenario_metrics_csv(std::fs::File::create(d.join("scenario_metrics.csv"))?, &metric_rows)?;
    }
    Ok(())
}

/// Loads a batch and checks that it was produced from the chosen design.
fn load_checked(batch: &Path, config: &Path, design: &DesignArgs) -> Result<(SpecSet, TrialSpec, RunManifest, Vec<trialsim::engine::TrialResult>)> {
    let set = load(config)?;
    let (spec, _) = chosen_spec(&set, design)?;
    let (manifest, results) = read_batch(batch)?;
    if manifest.fingerprint != spec.fingerprint() {
        bail!(
            "{} was not simulated from this design (check --scenario and threshold flags)",
            batch.display()
        );
    }
    Ok((set, spec, manifest, results))
}

fn cmd_metrics(
    batch: &Path,
    config: &Path,
    design: &DesignArgs,
    seed: Option<u64>,
    out: Option<&Path>,
    args: &SummaryArgs,
    log: &mut SessionLog,
) -> Result<()> {
    let (set, spec, manifest, results) = load_checked(batch, config, design)?;
    let seed = seed.unwrap_or(manifest.base_seed);
    log.note_run("metrics", results.len(), seed, &manifest.fingerprint);
    let opts = summary_options(&spec, args, &set)?;
    let summary = summarise(&results, &spec, &opts, args, seed)?;
    print!("{}", report::metrics_table(&summary));
    if let Some(p) = out {
        export_metrics_csv(p, &summary)?;
    }
    Ok(())
}

fn cmd_combos(batch: &Path, config: &Path, design: &DesignArgs, out: Option<&Path>) -> Result<()> {
    let (_, spec, _, results) = load_checked(batch, config, design)?;
    let combos = remaining_arm_combos(&results);
    match out {
        Some(p) => write_combos_csv(std::fs::File::create(p)?, spec.arms(), &combos)?,
        None => write_combos_csv(std::io::stdout().lock(), spec.arms(), &combos)?,
    }
    Ok(())
}
