//! Serial-chain kinematics of the tool frame `{b}`.
//!
//! Chains are described with modified (Craig) Denavit-Hartenberg rows, all
//! joints revolute, followed by a fixed tool transform. Position, velocity and
//! acceleration of `{b}` are propagated link to link, the same way the
//! forward pass of the recursive Newton-Euler algorithm does it.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

const ROTATION_TOL: f64 = 1e-10;

/// One modified-DH row: `RotX(alpha) * TransX(a) * RotZ(q + offset) * TransZ(d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhJoint {
    pub a: f64,
    pub d: f64,
    pub alpha: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLimits {
    pub q_min: f64,
    pub q_max: f64,
    pub qd_max: f64,
    pub qdd_max: f64,
    pub jerk_max: f64,
}

/// Rigid transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            position: Vector3::zeros(),
            rotation: Matrix3::identity(),
        }
    }

    pub fn new(position: Vector3<f64>, rotation: Matrix3<f64>) -> Result<Self> {
        if !is_rotation(&rotation, ROTATION_TOL) {
            return Err(Error::NotARotation("pose rotation"));
        }
        Ok(Pose { position, rotation })
    }
}

/// Precomputed per-joint constants.
#[derive(Debug, Clone, Copy)]
struct JointConst {
    sa: f64,
    ca: f64,
    /// Origin of frame i expressed in frame i-1 (independent of q_i).
    offset_vec: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct ChainModel {
    pub name: String,
    joints: Vec<DhJoint>,
    consts: Vec<JointConst>,
    pub limits: Vec<JointLimits>,
    pub base: Pose,
    pub tool: Pose,
    /// Named joint configurations shipped with the chain description.
    pub configurations: BTreeMap<String, Vec<f64>>,
}

impl ChainModel {
    pub fn new(
        name: impl Into<String>,
        joints: Vec<DhJoint>,
        limits: Vec<JointLimits>,
        base: Pose,
        tool: Pose,
    ) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::invalid("a chain needs at least one joint"));
        }
        Error::check_len("joint limits", joints.len(), limits.len())?;
        for (i, l) in limits.iter().enumerate() {
            let ok = l.q_min < l.q_max && l.qd_max > 0.0 && l.qdd_max > 0.0 && l.jerk_max > 0.0;
            if !ok {
                return Err(Error::invalid(format!("joint {} has inconsistent limits", i + 1)));
            }
        }
        for (what, pose) in [("base rotation", &base), ("tool rotation", &tool)] {
            if !is_rotation(&pose.rotation, ROTATION_TOL) {
                return Err(Error::NotARotation(what));
            }
        }
        let consts = joints
            .iter()
            .map(|j| {
                let (sa, ca) = j.alpha.sin_cos();
                JointConst {
                    sa,
                    ca,
                    offset_vec: [j.a, -j.d * sa, j.d * ca],
                }
            })
            .collect();
        Ok(ChainModel {
            name: name.into(),
            joints,
            consts,
            limits,
            base,
            tool,
            configurations: BTreeMap::new(),
        })
    }

    pub fn n_dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[DhJoint] {
        &self.joints
    }

    pub fn configuration(&self, name: &str) -> Result<&[f64]> {
        self.configurations
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::invalid(format!("chain '{}' has no configuration '{name}'", self.name)))
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let raw: ChainFile = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            msg: e.to_string(),
        })?;
        raw.into_model()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, path)
    }
}

/// Position, velocity and acceleration of the tool frame, all in the base frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FramePva<T: Real = f64> {
    pub p: Vector3<T>,
    pub r: Matrix3<T>,
    pub v: Vector3<T>,
    pub omega: Vector3<T>,
    pub a: Vector3<T>,
    pub alpha: Vector3<T>,
}

impl FramePva<f64> {
    /// A frame at rest with the given orientation.
    pub fn stationary(r: Matrix3<f64>) -> Self {
        FramePva {
            p: Vector3::zeros(),
            r,
            v: Vector3::zeros(),
            omega: Vector3::zeros(),
            a: Vector3::zeros(),
            alpha: Vector3::zeros(),
        }
    }
}

fn lift3<T: Real>(v: &Vector3<f64>) -> Vector3<T> {
    Vector3::new(T::cst(v.x), T::cst(v.y), T::cst(v.z))
}

fn lift33<T: Real>(m: &Matrix3<f64>) -> Matrix3<T> {
    Matrix3::from_fn(|i, j| T::cst(m[(i, j)]))
}

/// `R_{i-1} * RotX(alpha) * RotZ(theta)` without building the two factors.
#[inline]
fn joint_rotation<T: Real>(prev: &Matrix3<T>, jc: &JointConst, theta: T) -> Matrix3<T> {
    let (st, ct) = (theta.sin(), theta.cos());
    let (sa, ca) = (T::cst(jc.sa), T::cst(jc.ca));
    let local = Matrix3::new(
        ct,
        -st,
        T::zero(),
        ca * st,
        ca * ct,
        -sa,
        sa * st,
        sa * ct,
        ca,
    );
    prev * local
}

#[inline]
fn offset_in_base<T: Real>(r: &Matrix3<T>, jc: &JointConst) -> Vector3<T> {
    let o = &jc.offset_vec;
    r.column(0).scale_generic(o[0]) + r.column(1).scale_generic(o[1]) + r.column(2).scale_generic(o[2])
}

trait ScaleGeneric<T: Real> {
    fn scale_generic(&self, k: f64) -> Vector3<T>;
}

impl<T: Real, S: nalgebra::storage::Storage<T, nalgebra::U3, nalgebra::U1>> ScaleGeneric<T>
    for nalgebra::Matrix<T, nalgebra::U3, nalgebra::U1, S>
{
    #[inline]
    fn scale_generic(&self, k: f64) -> Vector3<T> {
        Vector3::new(self[0].scale(k), self[1].scale(k), self[2].scale(k))
    }
}

/// Forward kinematics generic over the scalar type.
pub fn pose_generic<T: Real>(model: &ChainModel, q: &[T]) -> (Vector3<T>, Matrix3<T>) {
    let mut r = lift33::<T>(&model.base.rotation);
    let mut p = lift3::<T>(&model.base.position);
    for (jc, (j, qi)) in model.consts.iter().zip(model.joints.iter().zip(q)) {
        p += offset_in_base(&r, jc);
        r = joint_rotation(&r, jc, *qi + T::cst(j.offset));
    }
    let tool_r = lift33::<T>(&model.tool.rotation);
    let p_b = p + &r * lift3::<T>(&model.tool.position);
    (p_b, r * tool_r)
}

/// First- and second-order kinematics of `{b}` generic over the scalar type.
pub fn frame_pva_generic<T: Real>(model: &ChainModel, q: &[T], qd: &[T], qdd: &[T]) -> FramePva<T> {
    let mut r = lift33::<T>(&model.base.rotation);
    let mut p = lift3::<T>(&model.base.position);
    let mut v = Vector3::<T>::zeros();
    let mut a = Vector3::<T>::zeros();
    let mut w = Vector3::<T>::zeros();
    let mut dw = Vector3::<T>::zeros();
    for (i, (jc, j)) in model.consts.iter().zip(model.joints.iter()).enumerate() {
        let rel = offset_in_base(&r, jc);
        p += rel;
        a += dw.cross(&rel) + w.cross(&w.cross(&rel));
        v += w.cross(&rel);
        r = joint_rotation(&r, jc, q[i] + T::cst(j.offset));
        let axis = r.column(2).into_owned();
        let spin = axis * qd[i];
        dw += axis * qdd[i] + w.cross(&spin);
        w += spin;
    }
    let rel = &r * lift3::<T>(&model.tool.position);
    FramePva {
        p: p + rel,
        r: r * lift33::<T>(&model.tool.rotation),
        v: v + w.cross(&rel),
        omega: w,
        a: a + dw.cross(&rel) + w.cross(&w.cross(&rel)),
        alpha: dw,
    }
}

pub fn forward_kinematics(model: &ChainModel, q: &[f64]) -> Result<Pose> {
    Error::check_len("joint positions", model.n_dof(), q.len())?;
    let (position, rotation) = pose_generic(model, q);
    Ok(Pose { position, rotation })
}

pub fn frame_pva(model: &ChainModel, q: &[f64], qd: &[f64], qdd: &[f64]) -> Result<FramePva> {
    let n = model.n_dof();
    Error::check_len("joint positions", n, q.len())?;
    Error::check_len("joint velocities", n, qd.len())?;
    Error::check_len("joint accelerations", n, qdd.len())?;
    Ok(frame_pva_generic(model, q, qd, qdd))
}

/// Axis-angle error `log(R_a R_b^T)` as a 3-vector in the base frame.
///
/// The generic version assumes proper rotations; it is smooth around zero
/// error so it can sit inside an equality constraint.
pub fn orientation_error_generic<T: Real>(ra: &Matrix3<T>, rb: &Matrix3<T>) -> Vector3<T> {
    let e = ra * rb.transpose();
    let half = T::cst(0.5);
    // sin(angle) * axis
    let v = Vector3::new(
        (e[(2, 1)] - e[(1, 2)]) * half,
        (e[(0, 2)] - e[(2, 0)]) * half,
        (e[(1, 0)] - e[(0, 1)]) * half,
    );
    let c = (e[(0, 0)] + e[(1, 1)] + e[(2, 2)] - T::one()) * half;
    let s2 = v.dot(&v);
    if s2.re() < 1e-12 {
        if c.re() > 0.0 {
            // angle/sin(angle) as a series in sin^2
            let f = T::one() + s2 * T::cst(1.0 / 6.0) + s2 * s2 * T::cst(3.0 / 40.0);
            return v * f;
        }
        // Near a half turn: recover the axis from the symmetric part.
        let angle = s2.sqrt().atan2(c);
        let diag = [e[(0, 0)].re(), e[(1, 1)].re(), e[(2, 2)].re()];
        let k = (0..3).fold(0, |b, i| if diag[i] > diag[b] { i } else { b });
        let mut axis = Vector3::<f64>::zeros();
        let denom = (2.0 * (1.0 + diag[k])).sqrt();
        for i in 0..3 {
            let sym = 0.5 * (e[(i, k)].re() + e[(k, i)].re());
            axis[i] = if i == k { (1.0 + diag[k]) / denom } else { sym / denom };
        }
        axis /= axis.norm();
        let vr = Vector3::new(v[0].re(), v[1].re(), v[2].re());
        if vr.dot(&axis) < 0.0 {
            axis = -axis;
        }
        return Vector3::new(angle * T::cst(axis.x), angle * T::cst(axis.y), angle * T::cst(axis.z));
    }
    let s = s2.sqrt();
    let angle = s.atan2(c);
    v * (angle / s)
}

pub fn orientation_error(ra: &Matrix3<f64>, rb: &Matrix3<f64>) -> Result<Vector3<f64>> {
    if !is_rotation(ra, 1e-9) {
        return Err(Error::NotARotation("first argument"));
    }
    if !is_rotation(rb, 1e-9) {
        return Err(Error::NotARotation("second argument"));
    }
    Ok(orientation_error_generic(ra, rb))
}

pub fn is_rotation(r: &Matrix3<f64>, tol: f64) -> bool {
    let dev = r * r.transpose() - Matrix3::identity();
    dev.amax() < tol && r.determinant() > 0.0
}

pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Fixed-axis roll-pitch-yaw: `Rz(yaw) * Ry(pitch) * Rx(roll)`.
pub fn rpy(roll: f64, pitch: f64, yaw: f64) -> Matrix3<f64> {
    rot_z(yaw) * rot_y(pitch) * rot_x(roll)
}

// ---------------------------------------------------------------------------
// chain description file

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainFile {
    name: String,
    #[serde(default)]
    base: Option<FrameEntry>,
    #[serde(default)]
    tool: Option<FrameEntry>,
    joint: Vec<JointEntry>,
    #[serde(default)]
    configurations: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameEntry {
    #[serde(default)]
    position: Option<[f64; 3]>,
    #[serde(default)]
    rpy: Option<[f64; 3]>,
    /// Row-major rotation matrix.
    #[serde(default)]
    rotation: Option<[[f64; 3]; 3]>,
}

impl FrameEntry {
    fn into_pose(self, what: &str) -> Result<Pose> {
        let position = self.position.map(Vector3::from).unwrap_or_else(Vector3::zeros);
        let rotation = match (self.rpy, self.rotation) {
            (Some(_), Some(_)) => {
                return Err(Error::invalid(format!("{what}: give either rpy or rotation, not both")))
            }
            (Some([r, p, y]), None) => rpy(r, p, y),
            (None, Some(rows)) => Matrix3::from_fn(|i, j| rows[i][j]),
            (None, None) => Matrix3::identity(),
        };
        if !is_rotation(&rotation, ROTATION_TOL) {
            return Err(Error::invalid(format!("{what}: rotation is not orthonormal to 1e-10")));
        }
        Ok(Pose { position, rotation })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointEntry {
    a: f64,
    d: f64,
    alpha: f64,
    #[serde(default)]
    offset: f64,
    q_min: f64,
    q_max: f64,
    qd_max: f64,
    qdd_max: f64,
    jerk_max: f64,
}

impl ChainFile {
    fn into_model(self) -> Result<ChainModel> {
        let base = match self.base {
            Some(f) => f.into_pose("base")?,
            None => Pose::identity(),
        };
        let tool = match self.tool {
            Some(f) => f.into_pose("tool")?,
            None => Pose::identity(),
        };
        let joints = self
            .joint
            .iter()
            .map(|j| DhJoint {
                a: j.a,
                d: j.d,
                alpha: j.alpha,
                offset: j.offset,
            })
            .collect();
        let limits = self
            .joint
            .iter()
            .map(|j| JointLimits {
                q_min: j.q_min,
                q_max: j.q_max,
                qd_max: j.qd_max,
                qdd_max: j.qdd_max,
                jerk_max: j.jerk_max,
            })
            .collect();
        let mut model = ChainModel::new(self.name, joints, limits, base, tool)?;
        for (name, q) in &self.configurations {
            Error::check_len("named configuration", model.n_dof(), q.len())?;
            let inside = q
                .iter()
                .zip(&model.limits)
                .all(|(qi, l)| *qi >= l.q_min && *qi <= l.q_max);
            if !inside {
                return Err(Error::invalid(format!("configuration '{name}' violates joint limits")));
            }
        }
        model.configurations = self.configurations;
        Ok(model)
    }
}
