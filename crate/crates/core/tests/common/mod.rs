//! Randomised and brute-force checks of the engine building blocks, shared by
//! the property tests and the acceptance run. Each check panics on failure
//! and returns a one-line description of what it verified.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Beta, ContinuousCDF, Gamma, Normal};

use trialsim::engine::{
    pairwise_vs_control, prob_all_equivalent, prob_best, run_trial_traced, TrialResult,
};
use trialsim::metrics::bootstrap_ci;
use trialsim::outcome::{OutcomeModel, PosteriorDraws};
use trialsim::par::{simulate_range, simulate_range_sequential, with_workers};
use trialsim::spec::{
    sqrt_control_prob, validate_spec, ControlRule, PerLook, RescaleMode, StartProbs, TrialDesign,
    TrialSpec,
};
use trialsim::stochastic::{derive_stream, sample_normal, BetaSampler, GammaSampler, BOOTSTRAP_STREAM_BASE};

const TOL: f64 = 1e-9;

fn random_design(rng: &mut ChaCha8Rng) -> TrialDesign {
    let n = rng.gen_range(2..=5);
    let arms: Vec<String> = (0..n).map(|i| format!("Arm {i}")).collect();
    let control = rng.gen_bool(0.4).then(|| rng.gen_range(0..n));
    let rule = match (control, rng.gen_range(0..3)) {
        (Some(_), 1) => ControlRule::SqrtBased,
        (Some(_), 2) => ControlRule::Match,
        _ => ControlRule::None,
    };
    let mut fixed = vec![None; n];
    let mut mins = vec![None; n];
    let mut maxs = vec![None; n];
    for i in 0..n {
        if rule != ControlRule::None && Some(i) == control {
            continue;
        }
        match rng.gen_range(0..6) {
            0 => fixed[i] = Some(rng.gen_range(0.05..0.9 / n as f64)),
            1 => mins[i] = Some(rng.gen_range(0.0..0.9 / n as f64)),
            2 => maxs[i] = Some(rng.gen_range(1.2 / n as f64..1.0)),
            3 => {
                mins[i] = Some(rng.gen_range(0.0..0.5 / n as f64));
                maxs[i] = Some(rng.gen_range(1.5 / n as f64..1.0));
            }
            _ => {}
        }
    }
    let n_looks = rng.gen_range(2..=6);
    let step = rng.gen_range(20..80);
    let data_looks: Vec<usize> = (1..=n_looks).map(|j| j * step).collect();
    let lag = rng.gen_range(0..30);
    let last = *data_looks.last().unwrap();
    let randomised_at_looks = data_looks.iter().map(|&d| (d + lag).min(last)).collect();
    let superiority = rng.gen_range(0.9..0.999);
    let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.6)).collect();
    TrialDesign {
        arms,
        control: control.map(|c| format!("Arm {c}")),
        outcome: OutcomeModel::binomial(ys),
        highest_is_best: rng.gen_bool(0.5),
        start_probs: StartProbs::Auto,
        fixed_probs: fixed.iter().any(Option::is_some).then_some(fixed),
        min_probs: mins.iter().any(Option::is_some).then_some(mins),
        max_probs: maxs.iter().any(Option::is_some).then_some(maxs),
        rescale_probs: if rng.gen_bool(0.5) { RescaleMode::Limits } else { RescaleMode::None },
        soften_power: PerLook::Scalar(rng.gen_range(0.0..=1.0)),
        control_prob_fixed: rule,
        data_looks,
        randomised_at_looks,
        superiority: PerLook::Scalar(superiority),
        inferiority: PerLook::Scalar(rng.gen_range(0.0..0.1)),
        equivalence_prob: rng.gen_bool(0.5).then_some(PerLook::Scalar(0.9)),
        equivalence_diff: Some(0.05),
        equivalence_only_first: false,
        futility_prob: None,
        futility_diff: None,
        futility_only_first: false,
        n_draws: 200,
    }
}

fn check_allocation(spec: &TrialSpec, result: &TrialResult) -> Result<(), String> {
    for t in result.trace.as_ref().unwrap() {
        let p = &t.alloc_probs;
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > TOL {
            return Err(format!("look {}: probabilities sum to {sum}", t.look));
        }
        let active: Vec<usize> = (0..p.len()).filter(|&i| t.active[i]).collect();
        for i in 0..p.len() {
            if !(p[i] >= -TOL && p[i] <= 1.0 + TOL) {
                return Err(format!("look {}: p[{i}] = {}", t.look, p[i]));
            }
            if !t.active[i] && p[i] != 0.0 {
                return Err(format!("look {}: inactive arm {i} has p = {}", t.look, p[i]));
            }
        }
        if active.len() < 2 {
            continue;
        }
        // Expected fixed values for active arms.
        let mut fixed: Vec<Option<f64>> = active.iter().map(|&i| spec.fixed_probs()[i]).collect();
        if let (Some(c), ControlRule::SqrtBased) = (t.control, spec.control_prob_fixed()) {
            if let Some(pos) = active.iter().position(|&i| i == c) {
                fixed[pos] = sqrt_control_prob(active.len() - 1);
            }
        }
        if spec.control_prob_fixed() == ControlRule::Match {
            continue;
        }
        let fixed_mass: f64 = fixed.iter().flatten().sum();
        let free: Vec<usize> = (0..active.len()).filter(|&j| fixed[j].is_none()).collect();
        if free.is_empty() || fixed_mass >= 1.0 {
            continue;
        }
        for (j, f) in fixed.iter().enumerate() {
            if let Some(v) = f {
                if (p[active[j]] - v).abs() > TOL {
                    return Err(format!("look {}: fixed arm {} has {} not {v}", t.look, active[j], p[active[j]]));
                }
            }
        }
        let mass = 1.0 - fixed_mass;
        let lo: f64 = free.iter().map(|&j| t.min_probs[active[j]].unwrap_or(0.0)).sum();
        let hi: f64 = free.iter().map(|&j| t.max_probs[active[j]].unwrap_or(1.0)).sum();
        if lo > mass + TOL || hi < mass - TOL {
            continue;
        }
        for &j in &free {
            let i = active[j];
            let (a, b) = (t.min_probs[i].unwrap_or(0.0), t.max_probs[i].unwrap_or(1.0));
            if p[i] < a - TOL || p[i] > b + TOL {
                return Err(format!("look {}: arm {i} has {} outside [{a}, {b}]", t.look, p[i]));
            }
        }
    }
    Ok(())
}

pub fn allocation_invariants_hold_across_random_designs() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    let mut attempts = 0;
    let mut with_limits = 0;
    while checked < 1000 {
        attempts += 1;
        assert!(attempts < 20_000, "generator produced too few valid designs");
        let design = random_design(&mut rng);
        let Ok(spec) = validate_spec(&design) else { continue };
        with_limits += (design.min_probs.is_some() || design.max_probs.is_some()) as usize;
        let result = run_trial_traced(&spec, &mut derive_stream(checked as u64, 0)).unwrap();
        if let Err(e) = check_allocation(&spec, &result) {
            panic!("design {checked}: {e}\n{design:#?}");
        }
        checked += 1;
    }
    assert!(with_limits >= 300, "only {with_limits} designs exercised limits");
    format!("1000 random designs ({with_limits} with limits): simplex, limits and fixed shares hold at every look")
}

fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

const N_KS: usize = 100_000;

pub fn beta_sampler_matches_analytic_distribution() -> String {
    for (k, &(a, b)) in [(1.0, 1.0), (0.5, 0.5), (26.0, 76.0), (2.094532, 0.7244881), (300.0, 900.0)]
        .iter()
        .enumerate()
    {
        let sampler = BetaSampler::new(a, b).unwrap();
        let mut rng = derive_stream(11, k as u64);
        let xs: Vec<f64> = (0..N_KS).map(|_| sampler.sample(&mut rng)).collect();
        let (m, v) = moments(&xs);
        let (em, ev) = (a / (a + b), a * b / ((a + b).powi(2) * (a + b + 1.0)));
        assert!((m - em).abs() < 5.0 * (ev / N_KS as f64).sqrt(), "Beta({a},{b}) mean {m} vs {em}");
        assert!((v / ev - 1.0).abs() < 0.03, "Beta({a},{b}) variance {v} vs {ev}");
        let dist = Beta::new(a, b).unwrap();
        let d = ks_statistic(xs, |x| dist.cdf(x));
        assert!(d < 0.01, "Beta({a},{b}) KS {d}");
    }
    "Beta samples: KS < 0.01 and moments match at 1e5 draws".to_string()
}

pub fn gamma_sampler_matches_analytic_distribution() -> String {
    for (k, &shape) in [0.3, 1.0, 2.5, 40.0].iter().enumerate() {
        let sampler = GammaSampler::new(shape);
        let mut rng = derive_stream(12, k as u64);
        let xs: Vec<f64> = (0..N_KS).map(|_| sampler.sample(&mut rng)).collect();
        let (m, v) = moments(&xs);
        assert!((m - shape).abs() < 5.0 * (shape / N_KS as f64).sqrt(), "Gamma({shape}) mean {m}");
        assert!((v / shape - 1.0).abs() < 0.05, "Gamma({shape}) variance {v}");
        let dist = Gamma::new(shape, 1.0).unwrap();
        let d = ks_statistic(xs, |x| dist.cdf(x));
        assert!(d < 0.01, "Gamma({shape}) KS {d}");
    }
    "Gamma samples: KS < 0.01 and moments match at 1e5 draws".to_string()
}

pub fn normal_sampler_matches_analytic_distribution() -> String {
    let (mu, sd) = (3.5, 0.7);
    let mut rng = derive_stream(13, 0);
    let xs: Vec<f64> = (0..N_KS).map(|_| sample_normal(&mut rng, mu, sd).unwrap()).collect();
    let (m, v) = moments(&xs);
    assert!((m - mu).abs() < 5.0 * sd / (N_KS as f64).sqrt());
    assert!((v / (sd * sd) - 1.0).abs() < 0.03);
    let dist = Normal::new(mu, sd).unwrap();
    let d = ks_statistic(xs, |x| dist.cdf(x));
    assert!(d < 0.01, "Normal KS {d}");
    format!("Normal samples: KS {d:.4} at 1e5 draws")
}

/// Draw matrix with heavy ties: values from a small grid.
fn tied_draws(rng: &mut ChaCha8Rng, n_rows: usize, n_cols: usize) -> (Vec<Vec<f64>>, PosteriorDraws) {
    let cols: Vec<Vec<f64>> = (0..n_cols)
        .map(|_| (0..n_rows).map(|_| rng.gen_range(0..8) as f64 * 0.0125).collect())
        .collect();
    let draws = PosteriorDraws::from_columns((0..n_cols).collect(), cols.clone());
    (cols, draws)
}

pub fn decision_probabilities_match_row_by_row_tallies() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..300 {
        let n_rows = rng.gen_range(1..=100);
        let n_cols = rng.gen_range(2..=5);
        let (cols, draws) = tied_draws(&mut rng, n_rows, n_cols);
        let hib = case % 2 == 0;
        let better = |a: f64, b: f64| if hib { a > b } else { a < b };

        // Best: the first column that no other column beats.
        let mut wins = vec![0usize; n_cols];
        for r in 0..n_rows {
            let first_best = (0..n_cols)
                .find(|&j| (0..n_cols).all(|k| !better(cols[k][r], cols[j][r])))
                .unwrap();
            wins[first_best] += 1;
        }
        let expected: Vec<f64> = wins.iter().map(|&w| w as f64 / n_rows as f64).collect();
        assert_eq!(prob_best(&draws, hib), expected, "case {case}");

        let (eq, fd) = (0.02, 0.015);
        for arm in 1..n_cols {
            let (mut s, mut e, mut f) = (0, 0, 0);
            for r in 0..n_rows {
                let (a, c) = (cols[arm][r], cols[0][r]);
                s += better(a, c) as usize;
                e += ((a - c).abs() < eq) as usize;
                let gain = if hib { a - c } else { c - a };
                f += (gain < fd) as usize;
            }
            let got = pairwise_vs_control(&draws, arm, 0, Some(eq), Some(fd), hib);
            assert_eq!(got.p_superior, s as f64 / n_rows as f64);
            assert_eq!(got.p_equivalent, Some(e as f64 / n_rows as f64));
            assert_eq!(got.p_futile, Some(f as f64 / n_rows as f64));
        }

        let subset: Vec<usize> = (0..n_cols).filter(|&j| j == 0 || rng.gen_bool(0.7)).collect();
        let all_eq = (0..n_rows)
            .filter(|&r| {
                subset
                    .iter()
                    .all(|&i| subset.iter().all(|&j| (cols[i][r] - cols[j][r]).abs() < 0.025))
            })
            .count();
        let expected = (subset.len() >= 2).then(|| all_eq as f64 / n_rows as f64);
        assert_eq!(prob_all_equivalent(&draws, &subset, 0.025), expected);
    }
    "300 tied draw matrices: prob_best, pairwise and all-equivalent equal exhaustive tallies".to_string()
}

pub fn bootstrap_standard_error_of_a_mean_matches_analytic_value() -> String {
    let mut data_rng = derive_stream(21, 0);
    let xs: Vec<f64> = (0..500).map(|_| sample_normal(&mut data_rng, 10.0, 2.0).unwrap()).collect();
    let (_, v) = moments(&xs);
    let analytic = (v / xs.len() as f64).sqrt();
    let mut rng = derive_stream(21, BOOTSTRAP_STREAM_BASE);
    let est = bootstrap_ci(
        xs.len(),
        |idx| Some(idx.iter().map(|&i| xs[i]).sum::<f64>() / idx.len() as f64),
        4000,
        0.95,
        &mut rng,
    )
    .unwrap()
    .unwrap();
    assert!((est.err_sd / analytic - 1.0).abs() < 0.10, "{} vs {analytic}", est.err_sd);
    assert!((est.err_mad / analytic - 1.0).abs() < 0.10, "{} vs {analytic}", est.err_mad);
    assert!(est.lo < est.estimate && est.estimate < est.hi);
    format!("bootstrap SE {:.5} vs analytic {analytic:.5}", est.err_sd)
}

fn small_spec() -> TrialSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    loop {
        if let Ok(s) = validate_spec(&random_design(&mut rng)) {
            return s;
        }
    }
}

pub fn batches_are_identical_across_execution_paths() -> String {
    let spec = small_spec();
    let seq = simulate_range_sequential(&spec, 77, 0..40).unwrap();
    assert_eq!(simulate_range(&spec, 77, 0..40).unwrap(), seq);
    assert_eq!(with_workers(3, || simulate_range(&spec, 77, 0..40)).unwrap(), seq);
    // Any sub-range reproduces the corresponding slice.
    assert_eq!(simulate_range(&spec, 77, 25..40).unwrap(), seq[25..]);
    "sequential, parallel and sub-range batches are identical".to_string()
}

/// Four arms with a common control on the square-root rule. Under the
/// null the three comparators are exchangeable, so their chances of being
/// declared superior must agree up to Monte Carlo error.
pub fn comparators_are_symmetric_around_a_common_control() -> String {
    let design = TrialDesign {
        arms: ["Control", "B", "C", "D"].map(String::from).to_vec(),
        control: Some("Control".into()),
        outcome: OutcomeModel::binomial(vec![0.3; 4]),
        highest_is_best: true,
        start_probs: StartProbs::Auto,
        fixed_probs: None,
        min_probs: None,
        max_probs: None,
        rescale_probs: RescaleMode::None,
        soften_power: PerLook::Scalar(1.0),
        control_prob_fixed: ControlRule::SqrtBased,
        data_looks: (100..=600).step_by(100).collect(),
        randomised_at_looks: (100..=600).step_by(100).collect(),
        superiority: PerLook::Scalar(0.9),
        inferiority: PerLook::Scalar(0.1),
        equivalence_prob: None,
        equivalence_diff: None,
        equivalence_only_first: false,
        futility_prob: None,
        futility_diff: None,
        futility_only_first: false,
        n_draws: 500,
    };
    let spec = validate_spec(&design).unwrap();
    assert!((spec.start_probs()[0] - 0.366).abs() < 5e-4);
    let n = 1000;
    let batch = simulate_range(&spec, 2718, 0..n).unwrap();
    let share = |arm: usize| {
        batch.iter().filter(|r| r.superior_arm == Some(arm)).count() as f64 / n as f64
    };
    let shares = [share(1), share(2), share(3)];
    let mean = shares.iter().sum::<f64>() / 3.0;
    let se = (mean * (1.0 - mean) / n as f64).sqrt();
    for s in shares {
        assert!((s - mean).abs() < 4.0 * se, "{shares:?}");
    }
    let size = |arm: usize| batch.iter().map(|r| r.arms[arm].n as f64).sum::<f64>() / n as f64;
    let sizes = [size(1), size(2), size(3)];
    let avg = sizes.iter().sum::<f64>() / 3.0;
    for s in sizes {
        assert!((s / avg - 1.0).abs() < 0.05, "{sizes:?}");
    }
    format!("comparator superiority shares {shares:?}")
}

/// Two independent stored runs with identical settings give byte-identical
/// batch files.
pub fn batch_files_are_bit_identical() -> String {
    let spec = small_spec();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    trialsim::io::run_batch(&spec, 60, 4131, Some(&a), None).unwrap();
    trialsim::io::run_batch(&spec, 60, 4131, Some(&b), None).unwrap();
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(x, y, "batch files differ");
    format!("two runs wrote identical {}-byte batch files", x.len())
}

/// The threshold search on the noiseless line `y = 1 - x`, whose target
/// crossing is known exactly.
pub fn calibration_finds_known_root() -> String {
    use trialsim::calibration::{calibrate_fn, CalibrationSettings};
    let settings = CalibrationSettings {
        target: 0.05,
        tol: 0.001,
        dir: 0,
        search_range: (0.9, 1.0),
        iter_max: 25,
        ..CalibrationSettings::default()
    };
    let r = calibrate_fn(|x| Ok::<f64, String>(1.0 - x), &settings, &[], |_, _| {}).unwrap();
    assert!(r.success, "{r:?}");
    assert!((r.best_x - 0.95).abs() <= settings.tol + 1e-12, "best_x {}", r.best_x);
    assert!(r.evaluations.len() <= 10, "{} evaluations", r.evaluations.len());
    format!("best_x {:.6} after {} evaluations", r.best_x, r.evaluations.len())
}
