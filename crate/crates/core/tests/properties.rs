mod common;

#[test]
fn allocation_invariants_hold_across_random_designs() {
    common::allocation_invariants_hold_across_random_designs();
}

#[test]
fn beta_sampler_matches_analytic_distribution() {
    common::beta_sampler_matches_analytic_distribution();
}

#[test]
fn gamma_sampler_matches_analytic_distribution() {
    common::gamma_sampler_matches_analytic_distribution();
}

#[test]
fn normal_sampler_matches_analytic_distribution() {
    common::normal_sampler_matches_analytic_distribution();
}

#[test]
fn decision_probabilities_match_row_by_row_tallies() {
    common::decision_probabilities_match_row_by_row_tallies();
}

#[test]
fn bootstrap_standard_error_of_a_mean_matches_analytic_value() {
    common::bootstrap_standard_error_of_a_mean_matches_analytic_value();
}

#[test]
fn batches_are_identical_across_execution_paths() {
    common::batches_are_identical_across_execution_paths();
}

#[test]
fn batch_files_are_bit_identical() {
    common::batch_files_are_bit_identical();
}

#[test]
fn comparators_are_symmetric_around_a_common_control() {
    common::comparators_are_symmetric_around_a_common_control();
}

#[test]
fn calibration_finds_known_root() {
    common::calibration_finds_known_root();
}
