//! Lumped pendulum approximation of a flexible beam clamped to the tool frame.
//!
//! The beam is replaced by a point mass `m` at distance `l` along `X_b`,
//! hinged about `Z_b` through a torsional spring `k` and damper `c`. The
//! pendulum angle `theta` is driven by the motion of `{b}` and by gravity.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::kinematics::{frame_pva_generic, ChainModel, FramePva};
use crate::scalar::Real;

pub const GRAVITY_Z: f64 = -9.81;

pub fn default_gravity() -> Vector3<f64> {
    Vector3::new(0.0, 0.0, GRAVITY_Z)
}

/// First root of `1 + cos(x) cosh(x) = 0` (clamped-free beam, first mode).
pub const BETA1_L: f64 = 1.875_104_068_711_961;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumParams {
    omega_n: f64,
    zeta: f64,
    length: f64,
    mass: f64,
    stiffness: f64,
    damping: f64,
}

impl PendulumParams {
    /// Builds the parameter set from modal quantities; `k` and `c` follow from
    /// `omega_n^2 = k / (m l^2)` and `2 zeta omega_n = c / (m l^2)`.
    pub fn new(omega_n: f64, zeta: f64, length: f64, mass: f64) -> Result<Self> {
        if !(omega_n > 0.0 && omega_n.is_finite()) {
            return Err(Error::invalid("natural frequency must be positive"));
        }
        if !(0.0..1.0).contains(&zeta) {
            return Err(Error::invalid("damping ratio must lie in [0, 1)"));
        }
        if !(length > 0.0 && mass > 0.0) {
            return Err(Error::invalid("pendulum length and mass must be positive"));
        }
        let inertia = mass * length * length;
        Ok(PendulumParams {
            omega_n,
            zeta,
            length,
            mass,
            stiffness: inertia * omega_n * omega_n,
            damping: 2.0 * zeta * omega_n * inertia,
        })
    }

    pub fn from_physical(stiffness: f64, damping: f64, length: f64, mass: f64) -> Result<Self> {
        if !(stiffness > 0.0 && damping >= 0.0 && length > 0.0 && mass > 0.0) {
            return Err(Error::invalid("physical pendulum parameters out of range"));
        }
        let inertia = mass * length * length;
        let omega_n = (stiffness / inertia).sqrt();
        Self::new(omega_n, damping / (2.0 * omega_n * inertia), length, mass)
    }

    pub fn omega_n(&self) -> f64 {
        self.omega_n
    }
    pub fn zeta(&self) -> f64 {
        self.zeta
    }
    pub fn length(&self) -> f64 {
        self.length
    }
    pub fn mass(&self) -> f64 {
        self.mass
    }
    pub fn stiffness(&self) -> f64 {
        self.stiffness
    }
    pub fn damping(&self) -> f64 {
        self.damping
    }

    /// Copy with the modal parameters scaled, e.g. to model plant mismatch.
    pub fn detuned(&self, omega_scale: f64, zeta_scale: f64) -> Result<Self> {
        Self::new(self.omega_n * omega_scale, self.zeta * zeta_scale, self.length, self.mass)
    }
}

/// Uniform Euler-Bernoulli beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSpec {
    pub rho: f64,
    pub ei: f64,
    pub length: f64,
}

impl BeamSpec {
    pub fn new(rho: f64, ei: f64, length: f64) -> Result<Self> {
        if rho > 0.0 && ei > 0.0 && length > 0.0 {
            Ok(BeamSpec { rho, ei, length })
        } else {
            Err(Error::invalid("beam density, rigidity and length must be positive"))
        }
    }

    /// Classical first bending frequency of the clamped-free beam.
    pub fn first_frequency(&self) -> f64 {
        BETA1_L * BETA1_L * (self.ei / (self.rho * self.length.powi(4))).sqrt()
    }
}

/// Canonical orientations of `{b}` with respect to gravity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Orientation {
    /// Gravity acts laterally on the beam.
    O1,
    /// Gravity compresses the beam (beam points up).
    O2,
    /// Gravity extends the beam (beam hangs down).
    O3,
}

impl Orientation {
    pub const ALL: [Orientation; 3] = [Orientation::O1, Orientation::O2, Orientation::O3];

    /// Rotation of `{b}` realizing this orientation (columns are `X_b, Y_b, Z_b`).
    pub fn rotation(self) -> Matrix3<f64> {
        let (x, y, z) = (Vector3::x(), Vector3::y(), Vector3::z());
        match self {
            Orientation::O1 => Matrix3::from_columns(&[x, z, -y]),
            Orientation::O2 => Matrix3::from_columns(&[z, x, y]),
            Orientation::O3 => Matrix3::from_columns(&[-z, x, -y]),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "O1" | "o1" => Ok(Orientation::O1),
            "O2" | "o2" => Ok(Orientation::O2),
            "O3" | "o3" => Ok(Orientation::O3),
            _ => Err(Error::invalid(format!("unknown orientation '{s}'"))),
        }
    }
}

/// Pendulum angular acceleration for an arbitrary motion of `{b}`.
pub fn pendulum_accel_generic<T: Real>(
    params: &PendulumParams,
    frame: &FramePva<T>,
    theta: T,
    theta_dot: T,
    g: &Vector3<f64>,
) -> T {
    let (s, c) = (theta.sin(), theta.cos());
    let x_b = frame.r.column(0).into_owned();
    let y_b = frame.r.column(1).into_owned();
    // beam direction and its derivative with respect to theta
    let n = x_b * c + y_b * s;
    let t = y_b * c - x_b * s;
    let g = Vector3::new(T::cst(g.x), T::cst(g.y), T::cst(g.z));
    let wn = params.omega_n;
    let spring = -theta_dot.scale(2.0 * params.zeta * wn) - theta.scale(wn * wn);
    let translational = t.dot(&(g - frame.a)).scale(1.0 / params.length);
    let angular = t.dot(&frame.alpha.cross(&n));
    let centrifugal = t.dot(&frame.omega.cross(&frame.omega.cross(&n)));
    spring + translational - angular - centrifugal
}

pub fn pendulum_accel(
    params: &PendulumParams,
    frame: &FramePva,
    theta: f64,
    theta_dot: f64,
    g: &Vector3<f64>,
) -> f64 {
    pendulum_accel_generic(params, frame, theta, theta_dot, g)
}

/// Closed-form stationary-frame dynamics for the canonical orientations.
pub fn specialize_orientation(params: &PendulumParams, which: Orientation, theta: f64, theta_dot: f64) -> f64 {
    let wn = params.omega_n;
    let base = -2.0 * params.zeta * wn * theta_dot - wn * wn * theta;
    let l = params.length;
    match which {
        Orientation::O1 => base + GRAVITY_Z * theta.cos() / l,
        Orientation::O2 => base - GRAVITY_Z * theta.sin() / l,
        Orientation::O3 => base + GRAVITY_Z * theta.sin() / l,
    }
}

/// Natural frequency of the model linearized about `theta = 0`.
pub fn linearized_frequency(params: &PendulumParams, which: Orientation) -> Result<f64> {
    let wn2 = params.omega_n * params.omega_n;
    let shift = GRAVITY_Z / params.length;
    let w2 = match which {
        Orientation::O1 => wn2,
        Orientation::O2 => wn2 + shift,
        Orientation::O3 => wn2 - shift,
    };
    if w2 <= 0.0 {
        return Err(Error::invalid(format!(
            "gravity buckles the pendulum in {which:?} (omega_n^2 + g_z/l = {w2:.4})"
        )));
    }
    Ok(w2.sqrt())
}

/// Static balance residual and its slope for a frame at rest.
fn static_balance(params: &PendulumParams, gb: &Vector3<f64>, theta: f64) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    let wn2 = params.omega_n * params.omega_n;
    let l = params.length;
    let f = -wn2 * theta + (-s * gb.x + c * gb.y) / l;
    let df = -wn2 + (-c * gb.x - s * gb.y) / l;
    (f, df)
}

/// Rest angle of the pendulum for a stationary frame with orientation `r_b`.
pub fn equilibrium_theta(params: &PendulumParams, r_b: &Matrix3<f64>, g: &Vector3<f64>) -> Result<f64> {
    let gb = r_b.transpose() * g;
    let (mut lo, mut hi) = (-0.5 * PI, 0.5 * PI);
    let bracketed = static_balance(params, &gb, lo).0 > 0.0 && static_balance(params, &gb, hi).0 < 0.0;
    let mut theta = 0.0;
    for _ in 0..50 {
        let (f, df) = static_balance(params, &gb, theta);
        if f.abs() <= 1e-12 {
            return Ok(theta);
        }
        if bracketed {
            if f > 0.0 {
                lo = theta;
            } else {
                hi = theta;
            }
        }
        let mut next = theta - f / df;
        if bracketed && !(next > lo && next < hi && df < 0.0) {
            next = 0.5 * (lo + hi);
        }
        if (next - theta).abs() < 1e-16 {
            return Ok(next);
        }
        theta = next;
    }
    Err(Error::NoConvergence("pendulum equilibrium did not converge in 50 iterations".into()))
}

/// Equilibrium angle and small-oscillation frequency/damping ratio about it
/// for an arbitrary stationary orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedMode {
    pub theta_eq: f64,
    pub omega: f64,
    pub zeta: f64,
}

pub fn linearize_at(params: &PendulumParams, r_b: &Matrix3<f64>, g: &Vector3<f64>) -> Result<LinearizedMode> {
    let theta_eq = equilibrium_theta(params, r_b, g)?;
    let gb = r_b.transpose() * g;
    let (_, df) = static_balance(params, &gb, theta_eq);
    if df >= 0.0 {
        return Err(Error::invalid("pendulum equilibrium is unstable in this orientation"));
    }
    let omega = (-df).sqrt();
    Ok(LinearizedMode {
        theta_eq,
        omega,
        zeta: params.zeta * params.omega_n / omega,
    })
}

/// Arm plus pendulum state `x = [q, theta, qd, theta_dot]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SetupState {
    pub q: Vec<f64>,
    pub theta: f64,
    pub qd: Vec<f64>,
    pub theta_dot: f64,
}

impl SetupState {
    pub fn at_rest(q: Vec<f64>, theta: f64) -> Self {
        let n = q.len();
        SetupState {
            q,
            theta,
            qd: vec![0.0; n],
            theta_dot: 0.0,
        }
    }

    pub fn n_dof(&self) -> usize {
        self.q.len()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(2 * self.q.len() + 2);
        x.extend_from_slice(&self.q);
        x.push(self.theta);
        x.extend_from_slice(&self.qd);
        x.push(self.theta_dot);
        x
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        if x.len() < 4 || x.len() % 2 != 0 {
            return Err(Error::invalid(format!("setup state of length {} is malformed", x.len())));
        }
        let n = x.len() / 2 - 1;
        Ok(SetupState {
            q: x[..n].to_vec(),
            theta: x[n],
            qd: x[n + 1..2 * n + 1].to_vec(),
            theta_dot: x[2 * n + 1],
        })
    }
}

/// `xdot = [qd, theta_dot, u, theta_ddot]` written into `out`.
pub fn setup_dynamics_generic<T: Real>(
    model: &ChainModel,
    params: &PendulumParams,
    x: &[T],
    u: &[T],
    g: &Vector3<f64>,
    out: &mut [T],
) {
    let n = model.n_dof();
    let (q, rest) = x.split_at(n);
    let theta = rest[0];
    let qd = &rest[1..=n];
    let theta_dot = rest[n + 1];
    let frame = frame_pva_generic(model, q, qd, u);
    out[..n].copy_from_slice(qd);
    out[n] = theta_dot;
    out[n + 1..=2 * n].copy_from_slice(u);
    out[2 * n + 1] = pendulum_accel_generic(params, &frame, theta, theta_dot, g);
}

pub fn setup_dynamics(
    model: &ChainModel,
    params: &PendulumParams,
    x: &SetupState,
    u: &[f64],
    g: &Vector3<f64>,
) -> Result<Vec<f64>> {
    let n = model.n_dof();
    Error::check_len("state joint positions", n, x.q.len())?;
    Error::check_len("state joint velocities", n, x.qd.len())?;
    Error::check_len("controls", n, u.len())?;
    let xv = x.to_vec();
    let mut out = vec![0.0; xv.len()];
    setup_dynamics_generic(model, params, &xv, u, g, &mut out);
    Ok(out)
}

/// Lumped pendulum equivalent of a beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LumpedBeam {
    pub mass: f64,
    pub stiffness: f64,
    pub omega: f64,
}

impl LumpedBeam {
    pub fn to_pendulum(&self, beam: &BeamSpec, zeta: f64) -> Result<PendulumParams> {
        PendulumParams::new(self.omega, zeta, beam.length, self.mass)
    }
}

/// Equates kinetic and strain energy of the first clamped-free mode with
/// those of the pendulum. The mode shape is scaled so that its tip deflection
/// equals `L`, i.e. a unit pendulum angle.
pub fn lump_analytical(beam: &BeamSpec) -> LumpedBeam {
    const INTERVALS: usize = 10_000;
    let len = beam.length;
    let beta = BETA1_L / len;
    let bl = BETA1_L;
    let sigma = (bl.cosh() + bl.cos()) / (bl.sinh() + bl.sin());
    let shape = |x: f64| {
        let b = beta * x;
        b.cosh() - b.cos() - sigma * (b.sinh() - b.sin())
    };
    let curvature = |x: f64| {
        let b = beta * x;
        beta * beta * (b.cosh() + b.cos() - sigma * (b.sinh() + b.sin()))
    };
    let scale = len / shape(len);
    let h = len / INTERVALS as f64;
    let simpson = |f: &dyn Fn(f64) -> f64| {
        let mut acc = f(0.0) + f(len);
        for i in 1..INTERVALS {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * h);
        }
        acc * h / 3.0
    };
    let phi2 = simpson(&|x| (scale * shape(x)).powi(2));
    let curv2 = simpson(&|x| (scale * curvature(x)).powi(2));
    let mass = beam.rho / (len * len) * phi2;
    let stiffness = beam.ei * curv2;
    LumpedBeam {
        mass,
        stiffness,
        omega: (stiffness / (mass * len * len)).sqrt(),
    }
}

/// Torque the pendulum spring-damper exerts about `Z_b`; the simulated
/// stand-in for an external torque estimate at the flange.
pub fn emulated_joint_torque(params: &PendulumParams, theta: f64, theta_dot: f64) -> f64 {
    params.stiffness * theta + params.damping * theta_dot
}

// ---------------------------------------------------------------------------
// parameter file

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamFile {
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    beam: Option<BeamEntry>,
    #[serde(default)]
    pendulum: Option<PendulumEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BeamEntry {
    rho: f64,
    ei: f64,
    length: f64,
    #[serde(default = "default_zeta")]
    zeta: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PendulumEntry {
    omega_n: f64,
    zeta: f64,
    length: f64,
    #[serde(default)]
    mass: Option<f64>,
}

fn default_zeta() -> f64 {
    0.007
}

/// A parameter set loaded from file together with its provenance label.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub label: String,
    pub params: PendulumParams,
    pub beam: Option<BeamSpec>,
}

impl ParamSet {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let raw: ParamFile = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            msg: e.to_string(),
        })?;
        let label = raw.label.unwrap_or_else(|| origin.display().to_string());
        match (raw.beam, raw.pendulum) {
            (None, None) => Err(Error::invalid("parameter file needs a [beam] or [pendulum] table")),
            (Some(b), None) => {
                let beam = BeamSpec::new(b.rho, b.ei, b.length)?;
                let params = lump_analytical(&beam).to_pendulum(&beam, b.zeta)?;
                Ok(ParamSet {
                    label,
                    params,
                    beam: Some(beam),
                })
            }
            (None, Some(p)) => {
                let mass = p
                    .mass
                    .ok_or_else(|| Error::invalid("[pendulum] needs a mass when no [beam] is given"))?;
                Ok(ParamSet {
                    label,
                    params: PendulumParams::new(p.omega_n, p.zeta, p.length, mass)?,
                    beam: None,
                })
            }
            (Some(b), Some(p)) => {
                let beam = BeamSpec::new(b.rho, b.ei, b.length)?;
                let lumped = lump_analytical(&beam);
                let rel = |a: f64, b: f64| (a - b).abs() <= 1e-6 * b.abs().max(1e-12);
                let consistent = rel(p.omega_n, lumped.omega)
                    && (p.length - beam.length).abs() <= 1e-9
                    && (p.zeta - b.zeta).abs() <= 1e-12
                    && p.mass.is_none_or(|m| rel(m, lumped.mass));
                if !consistent {
                    return Err(Error::invalid(
                        "[beam] and [pendulum] tables disagree; give one or make them consistent",
                    ));
                }
                Ok(ParamSet {
                    label,
                    params: lumped.to_pendulum(&beam, b.zeta)?,
                    beam: Some(beam),
                })
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> PendulumParams {
        PendulumParams::new(18.44, 0.007, 0.52, 0.08).unwrap()
    }

    #[test]
    fn consistency_of_derived_constants() {
        let p = params();
        let inertia = p.mass() * p.length() * p.length();
        assert!(((p.stiffness() / inertia).sqrt() - p.omega_n()).abs() < 1e-9);
        assert!((p.damping() / (2.0 * inertia * p.omega_n()) - p.zeta()).abs() < 1e-9);
        let q = PendulumParams::from_physical(p.stiffness(), p.damping(), p.length(), p.mass()).unwrap();
        assert!((q.omega_n() - p.omega_n()).abs() < 1e-12);
        assert!((q.zeta() - p.zeta()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(PendulumParams::new(0.0, 0.0, 1.0, 1.0).is_err());
        assert!(PendulumParams::new(1.0, 1.0, 1.0, 1.0).is_err());
        assert!(PendulumParams::new(1.0, 0.1, -1.0, 1.0).is_err());
        assert!(BeamSpec::new(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn canonical_rotations_are_proper() {
        for o in Orientation::ALL {
            assert!(crate::kinematics::is_rotation(&o.rotation(), 1e-15));
        }
    }

    #[test]
    fn o1_at_zero_angle() {
        let p = params();
        let acc = specialize_orientation(&p, Orientation::O1, 0.0, 0.0);
        assert_eq!(acc, GRAVITY_Z / p.length());
    }

    #[test]
    fn o3_substitution() {
        let p = PendulumParams::new(18.44, 0.0, 0.52, 0.08).unwrap();
        let expect = -18.44f64.powi(2) * 0.1 + GRAVITY_Z * 0.1f64.sin() / 0.52;
        assert!((specialize_orientation(&p, Orientation::O3, 0.1, 0.0) - expect).abs() < 1e-12);
    }

    #[test]
    fn o2_matches_general_form() {
        let p = params();
        let frame = FramePva::stationary(Orientation::O2.rotation());
        let (th, thd) = (0.13, -0.4);
        let expect = -2.0 * p.zeta() * p.omega_n() * thd - p.omega_n().powi(2) * th - GRAVITY_Z * th.sin() / p.length();
        assert_eq!(pendulum_accel(&p, &frame, th, thd, &default_gravity()), expect);
    }

    #[test]
    fn frequency_shift_table_values() {
        let p = params();
        assert_eq!(linearized_frequency(&p, Orientation::O1).unwrap(), 18.44);
        assert!((linearized_frequency(&p, Orientation::O2).unwrap() - 17.92).abs() < 0.01);
        assert!((linearized_frequency(&p, Orientation::O3).unwrap() - 18.95).abs() < 0.01);
    }

    #[test]
    fn buckling_is_an_error() {
        let p = PendulumParams::new(2.0, 0.0, 0.52, 0.08).unwrap();
        assert!(linearized_frequency(&p, Orientation::O2).is_err());
        assert!(linearized_frequency(&p, Orientation::O3).is_ok());
    }

    #[test]
    fn equilibria() {
        let p = PendulumParams::new(18.57, 0.007, 0.42, 0.08).unwrap();
        let g = default_gravity();
        for o in [Orientation::O2, Orientation::O3] {
            assert_eq!(equilibrium_theta(&p, &o.rotation(), &g).unwrap(), 0.0);
        }
        assert_eq!(equilibrium_theta(&p, &Orientation::O1.rotation(), &Vector3::zeros()).unwrap(), 0.0);

        // bisection oracle on omega_n^2 theta = g_z cos(theta) / l
        let h = |t: f64| 18.57f64.powi(2) * t - GRAVITY_Z * t.cos() / 0.42;
        let (mut lo, mut hi) = (-1.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let th = equilibrium_theta(&p, &Orientation::O1.rotation(), &g).unwrap();
        assert!((th - 0.5 * (lo + hi)).abs() < 1e-13);
        assert!(specialize_orientation(&p, Orientation::O1, th, 0.0).abs() < 1e-12);
    }

    #[test]
    fn torque_emulation() {
        let p = PendulumParams::new(18.57, 0.0, 0.42, 0.08).unwrap();
        assert_eq!(emulated_joint_torque(&p, 0.0, 0.0), 0.0);
        assert!((emulated_joint_torque(&p, 0.1, 3.0) - p.stiffness() * 0.1).abs() < 1e-15);
    }

    #[test]
    fn lumping_scales() {
        let b = BeamSpec::new(0.6296, 1.26667, 0.52).unwrap();
        let w = lump_analytical(&b).omega;
        let w4 = lump_analytical(&BeamSpec::new(0.6296, 4.0 * 1.26667, 0.52).unwrap()).omega;
        let wr = lump_analytical(&BeamSpec::new(4.0 * 0.6296, 1.26667, 0.52).unwrap()).omega;
        assert!((w4 / w - 2.0).abs() < 1e-9);
        assert!((wr / w - 0.5).abs() < 1e-9);
    }

    #[test]
    fn param_file_forms() {
        let beam_only = "[beam]\nrho = 0.6296\nei = 1.26667\nlength = 0.52\n";
        let set = ParamSet::from_toml_str(beam_only, Path::new("b.toml")).unwrap();
        assert_eq!(set.params.zeta(), 0.007);
        assert_eq!(set.params.length(), 0.52);

        let w = set.params.omega_n();
        let both = format!("{beam_only}[pendulum]\nomega_n = {w}\nzeta = 0.007\nlength = 0.52\n");
        assert!(ParamSet::from_toml_str(&both, Path::new("b.toml")).is_ok());
        let clash = format!("{beam_only}[pendulum]\nomega_n = 20.0\nzeta = 0.007\nlength = 0.52\n");
        assert!(ParamSet::from_toml_str(&clash, Path::new("b.toml")).is_err());

        let no_mass = "[pendulum]\nomega_n = 18.0\nzeta = 0.007\nlength = 0.5\n";
        assert!(ParamSet::from_toml_str(no_mass, Path::new("p.toml")).is_err());
        let unknown = "[pendulum]\nomega_n = 18.0\nzeta = 0.007\nlength = 0.5\nmass = 0.1\ncolor = 1\n";
        assert!(ParamSet::from_toml_str(unknown, Path::new("p.toml")).is_err());
    }
}
