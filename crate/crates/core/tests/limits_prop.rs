use proptest::prelude::*;
use trialsim::engine::fit_to_limits;

fn bounds() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (2usize..7).prop_flat_map(|k| {
        (
            prop::collection::vec(0.001f64..1.0, k),
            prop::collection::vec(0.0f64..0.3, k),
            prop::collection::vec(0.3f64..1.0, k),
        )
    })
}

proptest! {
    #[test]
    fn fitted_shares_sum_to_mass_and_respect_feasible_bounds((w, lo, hi) in bounds(), mass in 0.2f64..1.0) {
        let out = fit_to_limits(&w, &lo, &hi, mass);
        prop_assert_eq!(out.len(), w.len());
        let total: f64 = out.iter().sum();
        prop_assert!((total - mass).abs() < 1e-9, "sum {} vs mass {}", total, mass);
        let feasible = lo.iter().sum::<f64>() <= mass && hi.iter().sum::<f64>() >= mass;
        if feasible {
            for i in 0..w.len() {
                prop_assert!(out[i] >= lo[i] - 1e-9 && out[i] <= hi[i] + 1e-9,
                    "arm {}: {} outside [{}, {}]", i, out[i], lo[i], hi[i]);
            }
        }
    }

    #[test]
    fn unclipped_arms_keep_their_relative_weights((w, lo, hi) in bounds()) {
        let out = fit_to_limits(&w, &lo, &hi, 1.0);
        prop_assume!(lo.iter().sum::<f64>() <= 1.0 && hi.iter().sum::<f64>() >= 1.0);
        let free: Vec<usize> = (0..w.len())
            .filter(|&i| out[i] > lo[i] + 1e-9 && out[i] < hi[i] - 1e-9)
            .collect();
        for pair in free.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            prop_assert!((out[a] / out[b] - w[a] / w[b]).abs() < 1e-6 * (w[a] / w[b]).max(1.0));
        }
    }

    #[test]
    fn loose_bounds_leave_normalised_weights_untouched(w in prop::collection::vec(0.01f64..1.0, 2..6)) {
        let k = w.len();
        let out = fit_to_limits(&w, &vec![0.0; k], &vec![1.0; k], 1.0);
        let s: f64 = w.iter().sum();
        for i in 0..k {
            prop_assert!((out[i] - w[i] / s).abs() < 1e-12);
        }
    }
}
