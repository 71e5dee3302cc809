mod common;

use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

use flexbeam::beam_model::{
    default_gravity, equilibrium_theta, linearized_frequency, lump_analytical, pendulum_accel, setup_dynamics,
    specialize_orientation, BeamSpec, Orientation, PendulumParams, SetupState, BETA1_L,
};
use flexbeam::kinematics::{forward_kinematics, frame_pva, FramePva};
use flexbeam::transcription::rk4_step;

/// Pendulum angular acceleration from the Euler-Lagrange equation of the tip
/// mass, with every partial derivative taken by central differences of
/// `K`, `P` and `D` evaluated on forward-kinematics positions only.
fn lagrangian_accel(
    chain: &flexbeam::kinematics::ChainModel,
    params: &PendulumParams,
    q_of_t: &dyn Fn(f64) -> Vec<f64>,
    theta: f64,
    theta_dot: f64,
) -> f64 {
    let (m, l) = (params.mass(), params.length());
    let k = m * l * l * params.omega_n().powi(2);
    let c = 2.0 * params.zeta() * params.omega_n() * m * l * l;
    let g = default_gravity();
    let mass_pos = |th: f64, t: f64| {
        let pose = forward_kinematics(chain, &q_of_t(t)).unwrap();
        let r = pose.rotation;
        pose.position + (r.column(0) * th.cos() + r.column(1) * th.sin()) * l
    };
    let h = 1e-4;
    let mass_vel = |th: f64, thd: f64, t: f64| {
        let dt = (mass_pos(th, t + h) - mass_pos(th, t - h)) / (2.0 * h);
        let dth = (mass_pos(th + h, t) - mass_pos(th - h, t)) / (2.0 * h);
        dt + dth * thd
    };
    let lagrangian = |th: f64, thd: f64, t: f64| {
        let v = mass_vel(th, thd, t);
        0.5 * m * v.dot(&v) + m * g.dot(&mass_pos(th, t)) - 0.5 * k * th * th
    };
    let dl_dthd = |th: f64, thd: f64, t: f64| (lagrangian(th, thd + h, t) - lagrangian(th, thd - h, t)) / (2.0 * h);
    let dl_dth = (lagrangian(theta + h, theta_dot, 0.0) - lagrangian(theta - h, theta_dot, 0.0)) / (2.0 * h);
    let g_th = (dl_dthd(theta + h, theta_dot, 0.0) - dl_dthd(theta - h, theta_dot, 0.0)) / (2.0 * h);
    let g_thd = (dl_dthd(theta, theta_dot + h, 0.0) - dl_dthd(theta, theta_dot - h, 0.0)) / (2.0 * h);
    let g_t = (dl_dthd(theta, theta_dot, h) - dl_dthd(theta, theta_dot, -h)) / (2.0 * h);
    (dl_dth - c * theta_dot - g_th * theta_dot - g_t) / g_thd
}

fn stationary(which: Orientation) -> FramePva {
    FramePva::stationary(which.rotation())
}

#[test]
fn equilibrium_matches_bisection() {
    let params = PendulumParams::new(18.57, 0.007, 0.42, 0.08).unwrap();
    let g_z = -9.81;
    let f = |th: f64| 18.57f64.powi(2) * th - g_z * th.cos() / 0.42;
    let (mut lo, mut hi) = (-0.5, 0.5);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let theta = equilibrium_theta(&params, &Orientation::O1.rotation(), &default_gravity()).unwrap();
    assert!((theta - lo).abs() < 1e-12);
    assert!(f(theta).abs() < 1e-12);
}

#[test]
fn undamped_energy_is_conserved() {
    let params = PendulumParams::new(18.57, 0.0, 0.52, 0.08).unwrap();
    let frame = stationary(Orientation::O1);
    let g = default_gravity();
    let (m, l) = (params.mass(), params.length());
    let k = m * l * l * params.omega_n().powi(2);
    let energy = |x: &[f64]| {
        let n = frame.r.column(0) * x[0].cos() + frame.r.column(1) * x[0].sin();
        0.5 * m * l * l * x[1] * x[1] + 0.5 * k * x[0] * x[0] - m * g.dot(&(n * l))
    };
    let period = 2.0 * std::f64::consts::PI / params.omega_n();
    let h = period / 200.0;
    let mut x = vec![0.1, 0.0];
    let e0 = energy(&x);
    let f = |x: &[f64], _u: &[f64], out: &mut [f64]| {
        out[0] = x[1];
        out[1] = pendulum_accel(&params, &frame, x[0], x[1], &g);
    };
    let mut drift: f64 = 0.0;
    for _ in 0..2000 {
        x = rk4_step(f, &x, &[], h);
        drift = drift.max((energy(&x) - e0).abs() / e0.abs());
    }
    assert!(drift < 1e-6, "relative energy drift {drift:e}");
}

#[test]
fn lumped_frequency_of_bundled_beam() {
    let beam = flexbeam::beam_model::ParamSet::load(&common::data("params/beam_steel.toml"))
        .unwrap()
        .beam
        .unwrap();
    let classical = BETA1_L * BETA1_L * (beam.ei / (beam.rho * beam.length.powi(4))).sqrt();
    assert!(common::rel_err(lump_analytical(&beam).omega, classical) < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn matches_euler_lagrange_oracle(
        q0 in prop::collection::vec(-1.5..1.5f64, 7),
        v in prop::collection::vec(-1.5..1.5f64, 7),
        acc in prop::collection::vec(-4.0..4.0f64, 7),
        theta in -0.4..0.4f64,
        theta_dot in -3.0..3.0f64,
    ) {
        let chain = common::chain("franka7");
        let params = common::params("pendulum_identified");
        let q_of_t = |t: f64| (0..7).map(|i| q0[i] + v[i] * t + 0.5 * acc[i] * t * t).collect::<Vec<_>>();
        let oracle = lagrangian_accel(&chain, &params, &q_of_t, theta, theta_dot);
        let frame = frame_pva(&chain, &q0, &v, &acc).unwrap();
        let model = pendulum_accel(&params, &frame, theta, theta_dot, &default_gravity());
        prop_assert!((model - oracle).abs() < 1e-4 * (1.0 + model.abs()), "{} vs {}", model, oracle);
    }

    #[test]
    fn canonical_orientations_agree_with_general_model(
        theta in -0.5..0.5f64,
        theta_dot in -5.0..5.0f64,
    ) {
        let params = common::params("pendulum_identified");
        for which in Orientation::ALL {
            let general = pendulum_accel(&params, &stationary(which), theta, theta_dot, &default_gravity());
            let special = specialize_orientation(&params, which, theta, theta_dot);
            prop_assert!((general - special).abs() < 1e-12);
        }
    }

    #[test]
    fn frequency_shift_identity(wn in 5.0..60.0f64, l in 0.2..1.5f64) {
        prop_assume!(wn * wn > 9.81 / l);
        let params = PendulumParams::new(wn, 0.01, l, 0.1).unwrap();
        let w2 = linearized_frequency(&params, Orientation::O2).unwrap();
        let w3 = linearized_frequency(&params, Orientation::O3).unwrap();
        prop_assert!((w2 * w2 + w3 * w3 - 2.0 * wn * wn).abs() < 1e-12 * wn * wn);
    }

    #[test]
    fn dynamics_are_affine_in_the_control(
        q in prop::collection::vec(-1.5..1.5f64, 7),
        qd in prop::collection::vec(-1.5..1.5f64, 7),
        u0 in prop::collection::vec(-5.0..5.0f64, 7),
        du in prop::collection::vec(-5.0..5.0f64, 7),
        theta in -0.4..0.4f64,
        theta_dot in -3.0..3.0f64,
    ) {
        let chain = common::chain("franka7");
        let params = common::params("pendulum_identified");
        let state = SetupState { q: q.clone(), theta, qd: qd.clone(), theta_dot };
        let eval = |s: f64| {
            let u: Vec<f64> = (0..7).map(|i| u0[i] + s * du[i]).collect();
            setup_dynamics(&chain, &params, &state, &u, &default_gravity()).unwrap()
        };
        let (a, b, c) = (eval(-1.0), eval(0.0), eval(1.0));
        for i in 0..a.len() {
            prop_assert!((a[i] - 2.0 * b[i] + c[i]).abs() < 1e-9);
        }
        let frame = frame_pva(&chain, &q, &qd, &u0).unwrap();
        let direct = pendulum_accel(&params, &frame, theta, theta_dot, &default_gravity());
        prop_assert_eq!(b[15], direct);
        prop_assert_eq!(&b[..7], &qd[..]);
        prop_assert_eq!(&b[8..15], &u0[..]);
    }

    #[test]
    fn lumping_reproduces_classical_frequency(
        rho in 0.05..5.0f64,
        ei in 0.05..50.0f64,
        length in 0.2..2.0f64,
    ) {
        let beam = BeamSpec::new(rho, ei, length).unwrap();
        let classical = BETA1_L * BETA1_L * (ei / (rho * length.powi(4))).sqrt();
        prop_assert!(common::rel_err(lump_analytical(&beam).omega, classical) < 1e-3);
    }
}

#[test]
fn stationary_frames_are_rest_points_at_equilibrium() {
    let params = common::params("pendulum_identified");
    for which in Orientation::ALL {
        let r: Matrix3<f64> = which.rotation();
        let theta = equilibrium_theta(&params, &r, &default_gravity()).unwrap();
        let acc = pendulum_accel(&params, &stationary(which), theta, 0.0, &default_gravity());
        assert!(acc.abs() < 1e-10, "{which:?}: {acc:e}");
    }
    let _ = Vector3::<f64>::zeros();
}

#[test]
fn per_orientation_sets_reproduce_measured_frequencies() {
    let o2 = common::params("pendulum_identified_o2");
    let o3 = common::params("pendulum_identified_o3");
    assert!((linearized_frequency(&o2, Orientation::O2).unwrap() - 17.61).abs() < 0.01);
    assert!((linearized_frequency(&o3, Orientation::O3).unwrap() - 19.19).abs() < 0.01);
}
