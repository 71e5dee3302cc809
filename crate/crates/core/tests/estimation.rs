mod common;

use proptest::prelude::*;

use flexbeam::beam_model::{default_gravity, Orientation, PendulumParams};
use flexbeam::cli::{add_noise, repetition_seed};
use flexbeam::estimation::{identify, IdentifyOptions, TimeSeries};
use flexbeam::simulator::{free_decay, linearized_mode_at};

fn oscillator(omega_n: f64, zeta: f64, periods: f64, per_period: usize) -> TimeSeries {
    let wd = omega_n * (1.0 - zeta * zeta).sqrt();
    let dt = 2.0 * std::f64::consts::PI / wd / per_period as f64;
    let steps = (periods * per_period as f64) as usize;
    let t: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let y = t.iter().map(|t| (-zeta * omega_n * t).exp() * (wd * t).cos()).collect();
    TimeSeries::new(t, y).unwrap()
}

fn no_mean_removal() -> IdentifyOptions {
    IdentifyOptions {
        min_prominence: 0.01,
        remove_mean: false,
        ..IdentifyOptions::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn noise_free_round_trip(omega_n in 5.0..60.0f64, zeta in 0.002..0.1f64) {
        let series = oscillator(omega_n, zeta, 10.0, 200);
        let est = identify(&series, &no_mean_removal()).unwrap();
        prop_assert!(est.n_peaks >= 6);
        prop_assert!(common::rel_err(est.omega_n, omega_n) < 1e-3);
        prop_assert!(common::rel_err(est.zeta, zeta) < 2e-2);
    }

    #[test]
    fn amplitude_scaling_leaves_decrement_unchanged(scale in 0.01..100.0f64, zeta in 0.002..0.05f64) {
        let series = oscillator(18.57, zeta, 8.0, 150);
        let opts = IdentifyOptions::default();
        let a = identify(&series, &opts).unwrap();
        let b = identify(&series.scaled(scale), &opts).unwrap();
        prop_assert!((a.log_decrement - b.log_decrement).abs() < 1e-12);
    }

    #[test]
    fn offset_leaves_period_unchanged(offset in -50.0..50.0f64) {
        let series = oscillator(18.57, 0.01, 8.0, 150);
        let shifted = TimeSeries::new(
            series.times().to_vec(),
            series.values().iter().map(|v| v + offset).collect(),
        )
        .unwrap();
        let opts = IdentifyOptions::default();
        let a = identify(&series, &opts).unwrap();
        let b = identify(&shifted, &opts).unwrap();
        prop_assert!(common::rel_err(b.period, a.period) < 1e-12);
    }
}

#[test]
fn noisy_decrement_monte_carlo() {
    let (omega_n, zeta) = (18.57, 0.007);
    let truth = 2.0 * std::f64::consts::PI * zeta / (1.0 - zeta * zeta).sqrt();
    let series = oscillator(omega_n, zeta, 30.0, 340);
    let opts = IdentifyOptions {
        smoothing: 21,
        max_peaks: 24,
        ..IdentifyOptions::default()
    };
    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let noisy = add_noise(&series, 40.0, repetition_seed(11, trial)).unwrap();
        let est = identify(&noisy, &opts).unwrap();
        worst = worst.max(common::rel_err(est.log_decrement, truth));
    }
    assert!(worst < 0.05, "worst relative decrement error {worst:.4}");
}

#[test]
fn pendulum_free_decay_matches_linearized_frequency() {
    let params = PendulumParams::new(18.57, 0.007, 0.52, 0.08).unwrap();
    let r = Orientation::O1.rotation();
    let g = default_gravity();
    let series = free_decay(&params, &r, &g, 0.02, 3.0, 1e-3).unwrap();
    let est = identify(&series, &IdentifyOptions::default()).unwrap();
    let mode = flexbeam::beam_model::linearize_at(&params, &r, &g).unwrap();
    assert!(common::rel_err(est.omega_n, mode.omega) < 0.02);
    let chain = common::chain("franka7");
    let q = chain.configuration("qO1").unwrap().to_vec();
    let at_start = linearized_mode_at(&chain, &params, &q, &g).unwrap();
    assert!(common::rel_err(at_start.omega, mode.omega) < 1e-9);
}
