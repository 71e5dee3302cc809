mod common;

use nalgebra::{Matrix3, Matrix4, Rotation3, Vector3};
use proptest::prelude::*;

use flexbeam::kinematics::{forward_kinematics, frame_pva, orientation_error, ChainModel, Pose};

fn homogeneous(r: &Matrix3<f64>, p: &Vector3<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(p);
    m
}

fn rx(a: f64) -> Matrix4<f64> {
    let (s, c) = a.sin_cos();
    Matrix4::new(1.0, 0.0, 0.0, 0.0, 0.0, c, -s, 0.0, 0.0, s, c, 0.0, 0.0, 0.0, 0.0, 1.0)
}

fn rz(a: f64) -> Matrix4<f64> {
    let (s, c) = a.sin_cos();
    Matrix4::new(c, -s, 0.0, 0.0, s, c, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0)
}

fn trans(x: f64, y: f64, z: f64) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m[(0, 3)] = x;
    m[(1, 3)] = y;
    m[(2, 3)] = z;
    m
}

/// Plain product of 4x4 transforms, one factor per DH parameter.
fn naive_fk(chain: &ChainModel, q: &[f64]) -> Matrix4<f64> {
    let mut t = homogeneous(&chain.base.rotation, &chain.base.position);
    for (j, qi) in chain.joints().iter().zip(q) {
        t = t * rx(j.alpha) * trans(j.a, 0.0, 0.0) * rz(qi + j.offset) * trans(0.0, 0.0, j.d);
    }
    t * homogeneous(&chain.tool.rotation, &chain.tool.position)
}

fn pose_matrix(p: &Pose) -> Matrix4<f64> {
    homogeneous(&p.rotation, &p.position)
}

fn joint_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.5..2.5f64, n)
}

#[test]
fn franka_configurations_match_naive_product() {
    let chain = common::chain("franka7");
    for q in chain.configurations.values() {
        let fk = pose_matrix(&forward_kinematics(&chain, q).unwrap());
        assert!((fk - naive_fk(&chain, q)).amax() < 1e-12);
    }
}

#[test]
fn geodesic_angle_of_small_z_turn() {
    let e = orientation_error(&flexbeam::kinematics::rot_z(0.1), &Matrix3::identity()).unwrap();
    assert!((e - Vector3::new(0.0, 0.0, 0.1)).norm() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn planar_chain_matches_naive_product(q in joint_vec(2)) {
        let chain = common::chain("planar2");
        let fk = pose_matrix(&forward_kinematics(&chain, &q).unwrap());
        prop_assert!((fk - naive_fk(&chain, &q)).amax() < 1e-12);
    }

    #[test]
    fn seven_joint_chain_matches_naive_product(q in joint_vec(7)) {
        let chain = common::chain("franka7");
        let fk = pose_matrix(&forward_kinematics(&chain, &q).unwrap());
        prop_assert!((fk - naive_fk(&chain, &q)).amax() < 1e-12);
    }

    #[test]
    fn rotations_stay_orthonormal(q in joint_vec(7)) {
        let chain = common::chain("franka7");
        let r = forward_kinematics(&chain, &q).unwrap().rotation;
        prop_assert!((r * r.transpose() - Matrix3::identity()).amax() < 1e-10);
        prop_assert!(r.determinant() > 0.0);
    }

    #[test]
    fn velocities_match_finite_differences(q in joint_vec(7), qd in prop::collection::vec(-2.0..2.0f64, 7)) {
        let chain = common::chain("franka7");
        let h = 1e-6;
        let at = |s: f64| {
            let qs: Vec<f64> = q.iter().zip(&qd).map(|(a, b)| a + s * b).collect();
            forward_kinematics(&chain, &qs).unwrap()
        };
        let (plus, minus) = (at(h), at(-h));
        let v_fd = (plus.position - minus.position) / (2.0 * h);
        let rdot = (plus.rotation - minus.rotation) / (2.0 * h);
        let pva = frame_pva(&chain, &q, &qd, &[0.0; 7]).unwrap();
        let skew = rdot * pva.r.transpose();
        let w_fd = Vector3::new(skew[(2, 1)], skew[(0, 2)], skew[(1, 0)]);
        prop_assert!((pva.v - v_fd).amax() < 1e-6);
        prop_assert!((pva.omega - w_fd).amax() < 1e-6);
    }

    #[test]
    fn accelerations_match_finite_differences(
        q in joint_vec(7),
        qd in prop::collection::vec(-2.0..2.0f64, 7),
        qdd in prop::collection::vec(-5.0..5.0f64, 7),
    ) {
        let chain = common::chain("franka7");
        let h = 1e-5;
        let at = |s: f64| {
            let qs: Vec<f64> = (0..7).map(|i| q[i] + s * qd[i] + 0.5 * s * s * qdd[i]).collect();
            let qds: Vec<f64> = (0..7).map(|i| qd[i] + s * qdd[i]).collect();
            frame_pva(&chain, &qs, &qds, &qdd).unwrap()
        };
        let (plus, minus) = (at(h), at(-h));
        let pva = at(0.0);
        prop_assert!((pva.a - (plus.v - minus.v) / (2.0 * h)).amax() < 1e-5);
        prop_assert!((pva.alpha - (plus.omega - minus.omega) / (2.0 * h)).amax() < 1e-5);
    }

    #[test]
    fn orientation_error_is_the_log_map(
        a in prop::array::uniform3(-1.5..1.5f64),
        b in prop::array::uniform3(-1.5..1.5f64),
    ) {
        let ra = Rotation3::from_scaled_axis(Vector3::from(a)).into_inner();
        let rb = Rotation3::from_scaled_axis(Vector3::from(b)).into_inner();
        let e = orientation_error(&ra, &rb).unwrap();
        let oracle = Rotation3::from_matrix_unchecked(ra * rb.transpose()).scaled_axis();
        prop_assert!((e - oracle).amax() < 1e-9);
        let cos = (((ra.transpose() * rb).trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        prop_assert!((e.norm() - cos.acos()).abs() < 1e-7);
        prop_assert_eq!(orientation_error(&ra, &ra).unwrap(), Vector3::zeros());
    }
}
