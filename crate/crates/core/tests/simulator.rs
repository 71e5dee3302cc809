mod common;

use nalgebra::Vector3;
use proptest::prelude::*;

use flexbeam::beam_model::{linearized_frequency, Orientation};
use flexbeam::estimation::{design_excitation, identify, IdentifyOptions};
use flexbeam::kinematics::forward_kinematics;
use flexbeam::nlp_solver::solve_ocp;
use flexbeam::simulator::{
    compare_controllers, residual_integral, residual_metric, rollout, RolloutOptions, RowSelection,
};
use flexbeam::trajectory::JointTrajectory;
use flexbeam::transcription::{OcpBounds, OcpKind};

#[test]
fn standing_arm_keeps_pendulum_at_rest() {
    let chain = common::chain("franka7");
    let params = common::params("pendulum_identified");
    let q = chain.configuration("qO1").unwrap().to_vec();
    let hold = JointTrajectory::hold(q, 1.0, 0.01).unwrap();
    let opts = RolloutOptions {
        t_r: 0.5,
        ..RolloutOptions::default()
    };
    let res = rollout(&chain, &params, &hold, &opts).unwrap();
    let drift = res.theta.iter().map(|th| (th - res.theta_eq_final).abs()).fold(0.0, f64::max);
    assert!(drift < 1e-12, "drift {drift:e}");
    assert!((res.t.last().unwrap() - (res.tf + 0.5)).abs() < 1e-12);
    assert_eq!(res.t.len(), res.tau.len());
    assert!(residual_metric(&res) < 1e-12);
}

#[test]
fn excitation_from_o2_rings_at_linearized_frequency() {
    let chain = common::chain("franka7");
    let params = common::params("pendulum_identified");
    let q0 = chain.configuration("qO2").unwrap().to_vec();
    let r = forward_kinematics(&chain, &q0).unwrap().rotation;
    assert!((r - Orientation::O2.rotation()).amax() < 1e-9);
    let traj = design_excitation(
        &chain,
        &q0,
        Vector3::new(0.0, 0.05, 0.0),
        &OcpBounds::from_limits(&chain.limits),
        0.3,
        &Default::default(),
    )
    .unwrap();
    let res = rollout(&chain, &params, &traj, &RolloutOptions::default()).unwrap();
    let post = res.torque_series().unwrap().window(res.tf, res.tf + 3.0).unwrap();
    let est = identify(&post, &IdentifyOptions::default()).unwrap();
    let measured = 2.0 * std::f64::consts::PI / est.period;
    let zeta = params.zeta() * params.omega_n() / linearized_frequency(&params, Orientation::O2).unwrap();
    let expected = linearized_frequency(&params, Orientation::O2).unwrap() * (1.0 - zeta * zeta).sqrt();
    assert!(common::rel_err(measured, expected) < 0.01, "{measured} vs {expected}");
}

#[test]
fn halving_the_step_barely_moves_the_metric() {
    let task = common::task("t1");
    let spec = task.spec.with_tf(task.travel_times().unwrap()[0]);
    let arm = solve_ocp(&spec, OcpKind::ArmOnly, &task.solver, None).unwrap();
    let traj = arm.to_joint_trajectory().unwrap();
    let v = |dt: f64| {
        let opts = RolloutOptions {
            dt,
            ..task.rollout.clone()
        };
        residual_metric(&rollout(&spec.chain, &task.plant, &traj, &opts).unwrap())
    };
    let (coarse, fine) = (v(1e-3), v(5e-4));
    assert!(common::rel_err(coarse, fine) < 1e-3, "{coarse} vs {fine}");
}

#[test]
fn arm_only_row_is_the_worst_in_matched_setting() {
    let task = common::task("t1");
    let mut setup = task.compare_setup(RowSelection::default()).unwrap();
    setup.workers = 3;
    let report = compare_controllers(&setup).unwrap();
    let base = report.row("aOCP", report.travel_times[0]).unwrap().v.unwrap();
    for row in &report.rows {
        assert!(row.v.unwrap() <= base, "{} at {}", row.controller, row.travel_time);
        let expected = 100.0 * row.v.unwrap() / base;
        assert!((row.ratio_pct.unwrap() - expected).abs() < 1e-9);
    }
}

fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|k| 0.01 * k as f64 + 1e-3 * ((k * 7) % 5) as f64).collect()
}

proptest! {
    #[test]
    fn metric_is_nonnegative_and_offset_free(
        y in prop::collection::vec(-10.0..10.0f64, 3..200),
        c in -100.0..100.0f64,
    ) {
        let t = grid(y.len());
        let v = residual_integral(&t, &y);
        prop_assert!(v >= 0.0);
        let shifted: Vec<f64> = y.iter().map(|v| v + c).collect();
        prop_assert!((residual_integral(&t, &shifted) - v).abs() < 1e-9 * (1.0 + v + c.abs()));
    }

    #[test]
    fn metric_vanishes_on_constant_signals(c in -100.0..100.0f64, n in 2usize..200) {
        let t = grid(n);
        prop_assert!(residual_integral(&t, &vec![c; n]) < 1e-12 * (1.0 + c.abs()));
    }
}
