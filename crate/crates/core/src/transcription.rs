//! Direct multiple-shooting transcription of the beam-handling optimal control
//! problem (and of its arm-only variant) into a smooth NLP.
//!
//! Decision vector layout: `z = [x_0, u_0, x_1, u_1, ..., x_N, u_N]` where `x`
//! is `[q, theta, qd, theta_dot]` for the full problem and `[q, qd]` for the
//! arm-only one. Fixed boundary values are encoded as equal lower and upper
//! bounds. Equality rows are the RK4 defects followed by the terminal position
//! and orientation rows; the jerk limits form two-sided inequality rows.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};

use crate::beam_model::{default_gravity, equilibrium_theta, setup_dynamics_generic, PendulumParams};
use crate::error::{Error, Result};
use crate::kinematics::{forward_kinematics, is_rotation, orientation_error_generic, pose_generic, ChainModel, JointLimits};
use crate::linalg::SparseMatrix;
use crate::nlp_solver::{NlpProblem, SolveReport};
use crate::scalar::{Dual, Real};
use crate::trajectory::JointTrajectory;

/// Smoothing constant of the jerk norm, `sqrt(|v|^2 + eps^2) - eps`.
pub const JERK_SMOOTHING: f64 = 1e-6;

const CHUNK: usize = 8;
type D8 = Dual<CHUNK>;

/// Classical fourth-order Runge-Kutta step with `u` held over the step.
pub fn rk4_step<T: Real, F>(mut f: F, x: &[T], u: &[T], h: f64) -> Vec<T>
where
    F: FnMut(&[T], &[T], &mut [T]),
{
    let n = x.len();
    let mut k1 = vec![T::zero(); n];
    let mut k2 = vec![T::zero(); n];
    let mut k3 = vec![T::zero(); n];
    let mut k4 = vec![T::zero(); n];
    f(x, u, &mut k1);
    let mut tmp: Vec<T> = x.iter().zip(&k1).map(|(a, k)| *a + k.scale(0.5 * h)).collect();
    f(&tmp, u, &mut k2);
    for i in 0..n {
        tmp[i] = x[i] + k2[i].scale(0.5 * h);
    }
    f(&tmp, u, &mut k3);
    for i in 0..n {
        tmp[i] = x[i] + k3[i].scale(h);
    }
    f(&tmp, u, &mut k4);
    (0..n)
        .map(|i| x[i] + (k1[i] + k2[i].scale(2.0) + k3[i].scale(2.0) + k4[i]).scale(h / 6.0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OcpKind {
    /// Arm and pendulum dynamics.
    Full,
    /// Beam dynamics neglected.
    ArmOnly,
}

impl OcpKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OcpKind::Full => "ocp",
            OcpKind::ArmOnly => "aocp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ocp" | "full" => Ok(OcpKind::Full),
            "aocp" | "arm" | "arm_only" => Ok(OcpKind::ArmOnly),
            other => Err(Error::invalid(format!("unknown problem kind '{other}' (expected ocp or aocp)"))),
        }
    }
}

/// How the weighted state and control terms enter the running cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostNorm {
    /// `e^T W e`
    Squared,
    /// `sqrt(e^T W e + eps^2) - eps`
    L2,
}

impl CostNorm {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(CostNorm::Squared),
            "l2" => Ok(CostNorm::L2),
            other => Err(Error::invalid(format!("unknown cost norm '{other}' (expected squared or l2)"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CostNorm::Squared => "squared",
            CostNorm::L2 => "l2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcpWeights {
    /// Diagonal of `W_x` over the full state `[q, theta, qd, theta_dot]`.
    pub state: Vec<f64>,
    /// Diagonal of `W_u`.
    pub control: Vec<f64>,
    pub jerk: f64,
    pub norm: CostNorm,
}

impl OcpWeights {
    pub fn default_for(n_dof: usize) -> Self {
        let mut state = vec![0.0; 2 * (n_dof + 1)];
        state[n_dof] = 1.0;
        state[2 * n_dof + 1] = 1e-2;
        OcpWeights {
            state,
            control: vec![1e-3; n_dof],
            jerk: 1e-6,
            norm: CostNorm::Squared,
        }
    }
}

/// Box sets on states, controls and jerk.
#[derive(Debug, Clone, PartialEq)]
pub struct OcpBounds {
    pub q_min: Vec<f64>,
    pub q_max: Vec<f64>,
    pub qd_max: Vec<f64>,
    pub u_max: Vec<f64>,
    pub jerk_max: Vec<f64>,
    /// Symmetric bound on the pendulum angle.
    pub theta_max: f64,
}

impl OcpBounds {
    pub fn from_limits(limits: &[JointLimits]) -> Self {
        OcpBounds {
            q_min: limits.iter().map(|l| l.q_min).collect(),
            q_max: limits.iter().map(|l| l.q_max).collect(),
            qd_max: limits.iter().map(|l| l.qd_max).collect(),
            u_max: limits.iter().map(|l| l.qdd_max).collect(),
            jerk_max: limits.iter().map(|l| l.jerk_max).collect(),
            theta_max: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OcpSpec {
    pub chain: ChainModel,
    /// Absent for arm-only problems.
    pub params: Option<PendulumParams>,
    pub gravity: Vector3<f64>,
    pub q0: Vec<f64>,
    pub target_position: Vector3<f64>,
    pub target_rotation: Matrix3<f64>,
    pub tf: f64,
    pub n_intervals: usize,
    pub weights: OcpWeights,
    pub bounds: OcpBounds,
    /// Fix the pendulum at rest in its equilibrium at `t_f` (full problem only).
    pub pendulum_terminal: bool,
}

impl OcpSpec {
    /// Spec with default grid (`N = 100`), weights, gravity and the chain's own limits.
    pub fn new(
        chain: ChainModel,
        params: Option<PendulumParams>,
        q0: Vec<f64>,
        target_position: Vector3<f64>,
        target_rotation: Matrix3<f64>,
        tf: f64,
    ) -> Self {
        let n = chain.n_dof();
        let bounds = OcpBounds::from_limits(&chain.limits);
        OcpSpec {
            chain,
            params,
            gravity: default_gravity(),
            q0,
            target_position,
            target_rotation,
            tf,
            n_intervals: 100,
            weights: OcpWeights::default_for(n),
            bounds,
            pendulum_terminal: true,
        }
    }

    /// A target equal to the current pose of `q0`.
    pub fn stay_put(chain: ChainModel, params: Option<PendulumParams>, q0: Vec<f64>, tf: f64) -> Result<Self> {
        let pose = forward_kinematics(&chain, &q0)?;
        Ok(Self::new(chain, params, q0, pose.position, pose.rotation, tf))
    }

    pub fn with_tf(&self, tf: f64) -> Self {
        let mut s = self.clone();
        s.tf = tf;
        s
    }

    pub fn validate(&self, kind: OcpKind) -> Result<()> {
        let n = self.chain.n_dof();
        Error::check_len("initial configuration", n, self.q0.len())?;
        if self.n_intervals < 10 {
            return Err(Error::invalid("the shooting grid needs at least 10 intervals"));
        }
        if !(self.tf > 0.0 && self.tf.is_finite()) {
            return Err(Error::invalid("travel time must be positive"));
        }
        if kind == OcpKind::Full && self.params.is_none() {
            return Err(Error::invalid("the full problem needs pendulum parameters"));
        }
        if !is_rotation(&self.target_rotation, 1e-9) {
            return Err(Error::NotARotation("target rotation"));
        }
        let w = &self.weights;
        Error::check_len("state weights", 2 * (n + 1), w.state.len())?;
        Error::check_len("control weights", n, w.control.len())?;
        if w.state.iter().chain(&w.control).any(|v| !(*v >= 0.0 && v.is_finite())) || !(w.jerk >= 0.0) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        let b = &self.bounds;
        for (what, v) in [
            ("lower position bounds", &b.q_min),
            ("upper position bounds", &b.q_max),
            ("velocity bounds", &b.qd_max),
            ("acceleration bounds", &b.u_max),
            ("jerk bounds", &b.jerk_max),
        ] {
            Error::check_len(what, n, v.len())?;
        }
        for i in 0..n {
            if !(b.q_min[i] <= b.q_max[i]) {
                return Err(Error::invalid(format!("joint {}: lower position bound exceeds upper", i + 1)));
            }
            if !(b.qd_max[i] >= 0.0 && b.u_max[i] >= 0.0 && b.jerk_max[i] >= 0.0) {
                return Err(Error::invalid(format!("joint {}: rate bounds must be nonnegative", i + 1)));
            }
            if self.q0[i] < b.q_min[i] || self.q0[i] > b.q_max[i] {
                return Err(Error::invalid(format!("joint {}: start configuration outside its bounds", i + 1)));
            }
        }
        if !(b.theta_max > 0.0) {
            return Err(Error::invalid("pendulum angle bound must be positive"));
        }
        Ok(())
    }
}

/// The transcribed problem.
#[derive(Debug, Clone)]
pub struct Nlp {
    spec: OcpSpec,
    kind: OcpKind,
    n_dof: usize,
    nx: usize,
    nv: usize,
    h: f64,
    theta0: f64,
    theta_tf: f64,
    x_ref: Vec<f64>,
    w_x: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    jerk_lo: Vec<f64>,
    jerk_hi: Vec<f64>,
}

pub fn build_nlp(spec: &OcpSpec, kind: OcpKind) -> Result<Nlp> {
    spec.validate(kind)?;
    let n = spec.chain.n_dof();
    let big_n = spec.n_intervals;
    let h = spec.tf / big_n as f64;
    let (theta0, theta_tf) = match (kind, &spec.params) {
        (OcpKind::Full, Some(p)) => {
            let r0 = forward_kinematics(&spec.chain, &spec.q0)?.rotation;
            (
                equilibrium_theta(p, &r0, &spec.gravity)?,
                equilibrium_theta(p, &spec.target_rotation, &spec.gravity)?,
            )
        }
        _ => (0.0, 0.0),
    };
    let full = kind == OcpKind::Full;
    let nx = if full { 2 * (n + 1) } else { 2 * n };
    let nv = nx + n;
    let b = &spec.bounds;
    if full && (theta0.abs() > b.theta_max || theta_tf.abs() > b.theta_max) {
        return Err(Error::invalid("pendulum equilibrium lies outside the angle bound"));
    }

    let (mut x_ref, mut w_x) = (spec.q0.clone(), spec.weights.state[..n].to_vec());
    if full {
        x_ref.push(theta0);
        w_x.push(spec.weights.state[n]);
    }
    x_ref.extend(std::iter::repeat_n(0.0, n));
    w_x.extend_from_slice(&spec.weights.state[n + 1..2 * n + 1]);
    if full {
        x_ref.push(0.0);
        w_x.push(spec.weights.state[2 * n + 1]);
    }

    let mut node_lb = b.q_min.clone();
    let mut node_ub = b.q_max.clone();
    if full {
        node_lb.push(-b.theta_max);
        node_ub.push(b.theta_max);
    }
    node_lb.extend(b.qd_max.iter().map(|v| -v));
    node_ub.extend(b.qd_max.iter().copied());
    if full {
        node_lb.push(f64::NEG_INFINITY);
        node_ub.push(f64::INFINITY);
    }
    node_lb.extend(b.u_max.iter().map(|v| -v));
    node_ub.extend(b.u_max.iter().copied());

    let n_vars = nv * (big_n + 1);
    let mut lb = Vec::with_capacity(n_vars);
    let mut ub = Vec::with_capacity(n_vars);
    for _ in 0..=big_n {
        lb.extend_from_slice(&node_lb);
        ub.extend_from_slice(&node_ub);
    }
    let mut fix = |i: usize, v: f64| {
        lb[i] = v;
        ub[i] = v;
    };
    // initial state and control
    for (j, v) in x_ref.iter().enumerate() {
        fix(j, *v);
    }
    for j in 0..n {
        fix(nx + j, 0.0);
    }
    // terminal rest
    let last = big_n * nv;
    let qd_off = if full { n + 1 } else { n };
    for j in 0..n {
        fix(last + qd_off + j, 0.0);
        fix(last + nx + j, 0.0);
    }
    if full && spec.pendulum_terminal {
        fix(last + n, theta_tf);
        fix(last + 2 * n + 1, 0.0);
    }

    let jerk_hi: Vec<f64> = (0..big_n).flat_map(|_| b.jerk_max.iter().map(|j| j * 1.0)).collect();
    let jerk_lo = jerk_hi.iter().map(|v| -v).collect();

    Ok(Nlp {
        spec: spec.clone(),
        kind,
        n_dof: n,
        nx,
        nv,
        h,
        theta0,
        theta_tf,
        x_ref,
        w_x,
        lb,
        ub,
        jerk_lo,
        jerk_hi,
    })
}

/// Gradient of the objective together with the constraint Jacobian.
#[derive(Debug, Clone)]
pub struct NlpGradients {
    pub objective: Vec<f64>,
    pub jacobian: SparseMatrix,
}

impl NlpGradients {
    /// `J v`
    pub fn jacobian_action(&self, v: &[f64]) -> Vec<f64> {
        self.jacobian.mul_vec(v)
    }

    /// `J^T w`
    pub fn jacobian_transpose_action(&self, w: &[f64]) -> Vec<f64> {
        self.jacobian.tmul_vec(w)
    }
}

pub fn nlp_gradients(nlp: &Nlp, z: &[f64]) -> Result<NlpGradients> {
    Error::check_len("decision vector", nlp.n_vars(), z.len())?;
    let mut g = vec![0.0; z.len()];
    nlp.objective_gradient(z, &mut g);
    Ok(NlpGradients {
        objective: g,
        jacobian: nlp.jacobian(z),
    })
}

impl Nlp {
    pub fn spec(&self) -> &OcpSpec {
        &self.spec
    }

    pub fn kind(&self) -> OcpKind {
        self.kind
    }

    pub fn n_dof(&self) -> usize {
        self.n_dof
    }

    pub fn n_intervals(&self) -> usize {
        self.spec.n_intervals
    }

    pub fn state_dim(&self) -> usize {
        self.nx
    }

    /// Variables per shooting node.
    pub fn node_dim(&self) -> usize {
        self.nv
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    pub fn theta_initial(&self) -> f64 {
        self.theta0
    }

    pub fn theta_terminal(&self) -> f64 {
        self.theta_tf
    }

    /// Initial state in this problem's state layout.
    pub fn initial_state(&self) -> &[f64] {
        &self.x_ref
    }

    pub fn n_defects(&self) -> usize {
        self.nx * self.spec.n_intervals
    }

    pub fn x_offset(&self, k: usize) -> usize {
        k * self.nv
    }

    pub fn u_offset(&self, k: usize) -> usize {
        k * self.nv + self.nx
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.spec.n_intervals).map(|k| k as f64 * self.h).collect()
    }

    /// Indices of `q`, `qd` (and `theta`, `theta_dot` when present) inside a state.
    pub fn qd_offset(&self) -> usize {
        match self.kind {
            OcpKind::Full => self.n_dof + 1,
            OcpKind::ArmOnly => self.n_dof,
        }
    }

    pub fn pack(&self, xs: &[Vec<f64>], us: &[Vec<f64>]) -> Result<Vec<f64>> {
        let nodes = self.spec.n_intervals + 1;
        Error::check_len("state nodes", nodes, xs.len())?;
        Error::check_len("control nodes", nodes, us.len())?;
        let mut z = Vec::with_capacity(self.n_vars());
        for (x, u) in xs.iter().zip(us) {
            Error::check_len("state", self.nx, x.len())?;
            Error::check_len("control", self.n_dof, u.len())?;
            z.extend_from_slice(x);
            z.extend_from_slice(u);
        }
        Ok(z)
    }

    pub fn unpack(&self, z: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        z.chunks(self.nv)
            .map(|c| (c[..self.nx].to_vec(), c[self.nx..].to_vec()))
            .unzip()
    }

    fn dynamics<T: Real>(&self, x: &[T], u: &[T], out: &mut [T]) {
        match (self.kind, &self.spec.params) {
            (OcpKind::Full, Some(p)) => setup_dynamics_generic(&self.spec.chain, p, x, u, &self.spec.gravity, out),
            _ => {
                let n = self.n_dof;
                out[..n].copy_from_slice(&x[n..]);
                out[n..].copy_from_slice(u);
            }
        }
    }

    /// One RK4 interval of the problem's dynamics.
    pub fn step<T: Real>(&self, x: &[T], u: &[T]) -> Vec<T> {
        rk4_step(|x, u, o| self.dynamics(x, u, o), x, u, self.h)
    }

    /// Integrates from `x_0` with the controls of `z` (single shooting).
    pub fn single_shooting(&self, z: &[f64]) -> Vec<Vec<f64>> {
        let mut xs = vec![z[..self.nx].to_vec()];
        for k in 0..self.spec.n_intervals {
            let u = &z[self.u_offset(k)..self.u_offset(k) + self.n_dof];
            let next = self.step(xs.last().unwrap(), u);
            xs.push(next);
        }
        xs
    }

    /// Infinity norm of equality residuals and inequality excess.
    pub fn violation(&self, z: &[f64]) -> f64 {
        let mut c = vec![0.0; self.n_eq() + self.n_ineq()];
        self.constraints(z, &mut c);
        let n_eq = self.n_eq();
        let eq = c[..n_eq].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let ineq = c[n_eq..]
            .iter()
            .zip(self.jerk_lo.iter().zip(&self.jerk_hi))
            .fold(0.0_f64, |m, (v, (lo, hi))| m.max(v - hi).max(lo - v));
        eq.max(ineq)
    }

    fn node_weight(&self, k: usize) -> f64 {
        if k == 0 || k == self.spec.n_intervals {
            0.5 * self.h
        } else {
            self.h
        }
    }

    fn objective_impl(&self, z: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let w = &self.spec.weights;
        let eps = JERK_SMOOTHING;
        let n = self.n_dof;
        let mut f = 0.0;
        for k in 0..=self.spec.n_intervals {
            let c = self.node_weight(k);
            let xo = self.x_offset(k);
            let uo = self.u_offset(k);
            let terms: [(usize, &[f64], &[f64]); 2] = [(xo, &self.w_x, &self.x_ref), (uo, &w.control, &[])];
            for (off, wt, reference) in terms {
                let dim = wt.len();
                let e = |j: usize| z[off + j] - reference.get(j).copied().unwrap_or(0.0);
                let s: f64 = (0..dim).map(|j| wt[j] * e(j) * e(j)).sum();
                match w.norm {
                    CostNorm::Squared => {
                        f += c * s;
                        if let Some(g) = grad.as_deref_mut() {
                            for j in 0..dim {
                                g[off + j] += 2.0 * c * wt[j] * e(j);
                            }
                        }
                    }
                    CostNorm::L2 => {
                        let r = (s + eps * eps).sqrt();
                        f += c * (r - eps);
                        if let Some(g) = grad.as_deref_mut() {
                            for j in 0..dim {
                                g[off + j] += c * wt[j] * e(j) / r;
                            }
                        }
                    }
                }
            }
        }
        if w.jerk > 0.0 {
            for k in 0..self.spec.n_intervals {
                let (a, b) = (self.u_offset(k), self.u_offset(k + 1));
                let s: f64 = (0..n).map(|i| ((z[b + i] - z[a + i]) / self.h).powi(2)).sum();
                let r = (s + eps * eps).sqrt();
                f += self.h * w.jerk * (r - eps);
                if let Some(g) = grad.as_deref_mut() {
                    for i in 0..n {
                        let d = w.jerk * (z[b + i] - z[a + i]) / self.h / r;
                        g[b + i] += d;
                        g[a + i] -= d;
                    }
                }
            }
        }
        f
    }

    /// Dual-number evaluation of one interval step; returns the `nx x nv`
    /// Jacobian of `RK4(x_k, u_k)` row-major.
    fn step_jacobian(&self, xk: &[f64], uk: &[f64], block: &mut [f64]) {
        let (nx, nv) = (self.nx, self.nv);
        let seed = |v: f64, j: usize, c0: usize| D8::variable(v, if j >= c0 { j - c0 } else { usize::MAX });
        for c0 in (0..nv).step_by(CHUNK) {
            let xd: Vec<D8> = xk.iter().enumerate().map(|(j, v)| seed(*v, j, c0)).collect();
            let ud: Vec<D8> = uk.iter().enumerate().map(|(j, v)| seed(*v, nx + j, c0)).collect();
            let out = self.step(&xd, &ud);
            let width = CHUNK.min(nv - c0);
            for (r, o) in out.iter().enumerate() {
                block[r * nv + c0..r * nv + c0 + width].copy_from_slice(&o.d[..width]);
            }
        }
    }

    fn terminal_residual<T: Real>(&self, q: &[T]) -> [T; 6] {
        let (p, r) = pose_generic(&self.spec.chain, q);
        let pt = &self.spec.target_position;
        let rt = Matrix3::from_fn(|i, j| T::cst(self.spec.target_rotation[(i, j)]));
        let e = orientation_error_generic(&r, &rt);
        [
            p.x - T::cst(pt.x),
            p.y - T::cst(pt.y),
            p.z - T::cst(pt.z),
            e.x,
            e.y,
            e.z,
        ]
    }
}

impl NlpProblem for Nlp {
    fn n_vars(&self) -> usize {
        self.nv * (self.spec.n_intervals + 1)
    }

    fn n_eq(&self) -> usize {
        self.n_defects() + 6
    }

    fn n_ineq(&self) -> usize {
        self.jerk_hi.len()
    }

    fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lb, &self.ub)
    }

    fn ineq_bounds(&self) -> (&[f64], &[f64]) {
        (&self.jerk_lo, &self.jerk_hi)
    }

    fn objective(&self, z: &[f64]) -> f64 {
        self.objective_impl(z, None)
    }

    fn objective_gradient(&self, z: &[f64], grad: &mut [f64]) -> f64 {
        self.objective_impl(z, Some(grad))
    }

    fn constraints(&self, z: &[f64], out: &mut [f64]) {
        let (nx, n) = (self.nx, self.n_dof);
        let big_n = self.spec.n_intervals;
        for k in 0..big_n {
            let xo = self.x_offset(k);
            let next = self.step(&z[xo..xo + nx], &z[xo + nx..xo + nx + n]);
            let xn = &z[self.x_offset(k + 1)..self.x_offset(k + 1) + nx];
            for r in 0..nx {
                out[k * nx + r] = xn[r] - next[r];
            }
        }
        let qn = &z[self.x_offset(big_n)..self.x_offset(big_n) + n];
        let term = self.terminal_residual(qn);
        let base = self.n_defects();
        out[base..base + 6].copy_from_slice(&term);
        let base = base + 6;
        for k in 0..big_n {
            let (a, b) = (self.u_offset(k), self.u_offset(k + 1));
            for i in 0..n {
                out[base + k * n + i] = (z[b + i] - z[a + i]) / self.h;
            }
        }
    }

    fn jacobian(&self, z: &[f64]) -> SparseMatrix {
        let (nx, nv, n) = (self.nx, self.nv, self.n_dof);
        let big_n = self.spec.n_intervals;
        let rows = self.n_eq() + self.n_ineq();
        let mut jac = SparseMatrix::with_capacity(self.n_vars(), rows, big_n * nx * (nv + 1) + 6 * n + 2 * big_n * n);
        let mut block = vec![0.0; nx * nv];
        for k in 0..big_n {
            let xo = self.x_offset(k);
            self.step_jacobian(&z[xo..xo + nx], &z[xo + nx..xo + nv], &mut block);
            let next = self.x_offset(k + 1);
            for r in 0..nx {
                let row = &block[r * nv..(r + 1) * nv];
                jac.push_row(
                    row.iter()
                        .enumerate()
                        .map(|(j, v)| (xo + j, -v))
                        .chain(std::iter::once((next + r, 1.0))),
                );
            }
        }
        let qo = self.x_offset(big_n);
        let mut tblock = vec![[0.0; 6]; n];
        for c0 in (0..n).step_by(CHUNK) {
            let qd: Vec<D8> = (0..n)
                .map(|j| D8::variable(z[qo + j], if j >= c0 { j - c0 } else { usize::MAX }))
                .collect();
            let res = self.terminal_residual(&qd);
            for j in c0..n.min(c0 + CHUNK) {
                for (r, v) in res.iter().enumerate() {
                    tblock[j][r] = v.d[j - c0];
                }
            }
        }
        for r in 0..6 {
            jac.push_row((0..n).map(|j| (qo + j, tblock[j][r])));
        }
        let inv_h = 1.0 / self.h;
        for k in 0..big_n {
            let (a, b) = (self.u_offset(k), self.u_offset(k + 1));
            for i in 0..n {
                jac.push_row([(a + i, -inv_h), (b + i, inv_h)]);
            }
        }
        jac
    }

    fn objective_hessian(&self, z: &[f64]) -> Option<Vec<(usize, usize, f64)>> {
        let w = &self.spec.weights;
        let eps = JERK_SMOOTHING;
        let n = self.n_dof;
        let mut trip = Vec::new();
        for k in 0..=self.spec.n_intervals {
            let c = self.node_weight(k);
            let terms: [(usize, &[f64], &[f64]); 2] =
                [(self.x_offset(k), &self.w_x, &self.x_ref), (self.u_offset(k), &w.control, &[])];
            for (off, wt, reference) in terms {
                let scale = match w.norm {
                    CostNorm::Squared => 2.0 * c,
                    CostNorm::L2 => {
                        let s: f64 = (0..wt.len())
                            .map(|j| {
                                let e = z[off + j] - reference.get(j).copied().unwrap_or(0.0);
                                wt[j] * e * e
                            })
                            .sum();
                        // diagonal majorant of the exact Hessian
                        c / (s + eps * eps).sqrt()
                    }
                };
                for (j, wj) in wt.iter().enumerate() {
                    if *wj > 0.0 {
                        trip.push((off + j, off + j, scale * wj));
                    }
                }
            }
        }
        if w.jerk > 0.0 {
            let mut v = vec![0.0; n];
            for k in 0..self.spec.n_intervals {
                let (a, b) = (self.u_offset(k), self.u_offset(k + 1));
                for i in 0..n {
                    v[i] = (z[b + i] - z[a + i]) / self.h;
                }
                let r = (v.iter().map(|x| x * x).sum::<f64>() + eps * eps).sqrt();
                let s = w.jerk / self.h;
                for i in 0..n {
                    for j in 0..=i {
                        let hv = s * (if i == j { 1.0 / r } else { 0.0 } - v[i] * v[j] / (r * r * r));
                        if hv == 0.0 {
                            continue;
                        }
                        trip.push((a + i, a + j, hv));
                        trip.push((b + i, b + j, hv));
                        trip.push((b + i, a + j, -hv));
                        if i != j {
                            trip.push((b + j, a + i, -hv));
                        }
                    }
                }
            }
        }
        Some(trip)
    }
}

/// Discretized optimal trajectory with solver diagnostics.
#[derive(Debug, Clone)]
pub struct OcpSolution {
    pub kind: OcpKind,
    pub n_dof: usize,
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub objective: f64,
    pub violation: f64,
    pub theta_initial: Option<f64>,
    pub theta_terminal: Option<f64>,
    pub report: SolveReport,
}

impl OcpSolution {
    pub fn from_decision(nlp: &Nlp, z: &[f64], report: SolveReport) -> Self {
        let (x, u) = nlp.unpack(z);
        let full = nlp.kind == OcpKind::Full;
        OcpSolution {
            kind: nlp.kind,
            n_dof: nlp.n_dof,
            t: nlp.times(),
            x,
            u,
            objective: nlp.objective(z),
            violation: nlp.violation(z),
            theta_initial: full.then_some(nlp.theta0),
            theta_terminal: full.then_some(nlp.theta_tf),
            report,
        }
    }

    pub fn tf(&self) -> f64 {
        *self.t.last().unwrap()
    }

    fn qd_offset(&self) -> usize {
        match self.kind {
            OcpKind::Full => self.n_dof + 1,
            OcpKind::ArmOnly => self.n_dof,
        }
    }

    pub fn positions(&self) -> Vec<Vec<f64>> {
        self.x.iter().map(|x| x[..self.n_dof].to_vec()).collect()
    }

    pub fn velocities(&self) -> Vec<Vec<f64>> {
        let o = self.qd_offset();
        self.x.iter().map(|x| x[o..o + self.n_dof].to_vec()).collect()
    }

    /// `(theta, theta_dot)` per node, full problems only.
    pub fn pendulum(&self) -> Option<Vec<(f64, f64)>> {
        (self.kind == OcpKind::Full).then(|| {
            self.x
                .iter()
                .map(|x| (x[self.n_dof], x[2 * self.n_dof + 1]))
                .collect()
        })
    }

    /// The joint motion commanded by this solution: the controls integrated exactly from `q_0`.
    pub fn to_joint_trajectory(&self) -> Result<JointTrajectory> {
        let q0 = self.x[0][..self.n_dof].to_vec();
        let qd0 = self.velocities()[0].clone();
        JointTrajectory::from_accelerations(self.t.clone(), q0, qd0, self.u.clone())
    }

    /// Columns `t, q*, qd*, u*[, theta, theta_dot]`.
    pub fn to_csv(&self) -> String {
        let n = self.n_dof;
        let mut s = String::from("t");
        for prefix in ["q", "qd", "u"] {
            for i in 1..=n {
                let _ = write!(s, ",{prefix}{i}");
            }
        }
        if self.kind == OcpKind::Full {
            s.push_str(",theta,theta_dot");
        }
        s.push('\n');
        let qd = self.velocities();
        let pend = self.pendulum();
        for k in 0..self.t.len() {
            let _ = write!(s, "{}", self.t[k]);
            for v in self.x[k][..n].iter().chain(&qd[k]).chain(&self.u[k]) {
                let _ = write!(s, ",{v}");
            }
            if let Some(p) = &pend {
                let _ = write!(s, ",{},{}", p[k].0, p[k].1);
            }
            s.push('\n');
        }
        s
    }
}
