//! End-to-end acceptance suite: one test per shipped guarantee. Each test
//! prints a single summary line with the measured values (run with
//! `--nocapture` to see the lines for passing tests too).

use modlab::verify::criterion;

fn run(id: usize) {
    let report = criterion(id).expect("criterion runner failed");
    println!("{}", report.summary_line());
    assert!(report.passed, "{}", report.summary_line());
}

#[test]
fn criterion_01_g_h_identity() {
    run(1);
}

#[test]
fn criterion_02_grid_oracle_matches_closed_form() {
    run(2);
}

#[test]
fn criterion_03_far_side_strict_bound() {
    run(3);
}

#[test]
fn criterion_04_balanced_maxima_and_descent() {
    run(4);
}

#[test]
fn criterion_05_cycle_reconstruction() {
    run(5);
}

#[test]
fn criterion_06_incremental_consistency() {
    run(6);
}

#[test]
fn criterion_07_mean_field_agreement() {
    run(7);
}

#[test]
fn criterion_08_score_concentration() {
    run(8);
}

#[test]
fn criterion_09_empirical_curve_tracks_h() {
    run(9);
}

#[test]
fn criterion_10_band_emptiness() {
    run(10);
}

#[test]
fn criterion_11_greedy_metastability() {
    run(11);
}

#[test]
fn criterion_12_gibbs_stationarity() {
    run(12);
}

#[test]
fn criterion_13_slow_mixing() {
    run(13);
}

#[test]
fn criterion_14_robustness_and_fattening() {
    run(14);
}
