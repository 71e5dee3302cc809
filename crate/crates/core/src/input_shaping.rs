//! Input shapers, trajectory convolution and the residual vibration of a
//! linear mode under an impulse sequence.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{Error, Result};
use crate::kinematics::{frame_pva, orientation_error, ChainModel};
use crate::trajectory::JointTrajectory;

/// Impulse sequence with amplitudes summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Shaper {
    times: Vec<f64>,
    amplitudes: Vec<f64>,
}

impl Shaper {
    pub fn new(times: Vec<f64>, amplitudes: Vec<f64>) -> Result<Self> {
        Error::check_len("shaper amplitudes", times.len(), amplitudes.len())?;
        if times.is_empty() {
            return Err(Error::invalid("a shaper needs at least one impulse"));
        }
        if times[0] != 0.0 {
            return Err(Error::invalid("the first impulse must be at t = 0"));
        }
        if !times.iter().chain(&amplitudes).all(|v| v.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("impulse times must be finite and increasing"));
        }
        let sum: f64 = amplitudes.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("impulse amplitudes sum to {sum}, not 1")));
        }
        Ok(Shaper { times, amplitudes })
    }

    /// Single unit impulse: leaves any trajectory unchanged.
    pub fn identity() -> Self {
        Shaper {
            times: vec![0.0],
            amplitudes: vec![1.0],
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// Time of the last impulse, i.e. the added motion time.
    pub fn delay(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn is_identity(&self) -> bool {
        self.times.len() == 1 && self.amplitudes[0] == 1.0
    }
}

/// Two-impulse zero-vibration shaper for a mode `(omega_n, zeta)`.
pub fn zv_shaper(omega_n: f64, zeta: f64) -> Result<Shaper> {
    if !(omega_n > 0.0 && omega_n.is_finite()) {
        return Err(Error::invalid("shaper frequency must be positive"));
    }
    if !(0.0..1.0).contains(&zeta) {
        return Err(Error::invalid("shaper damping ratio must lie in [0, 1)"));
    }
    let root = (1.0 - zeta * zeta).sqrt();
    let k = (-std::f64::consts::PI * zeta / root).exp();
    let td = 2.0 * std::f64::consts::PI / (omega_n * root);
    let a1 = 1.0 / (1.0 + k);
    Ok(Shaper {
        times: vec![0.0, 0.5 * td],
        amplitudes: vec![a1, 1.0 - a1],
    })
}

/// Residual vibration of the mode `(omega_n, zeta)` after the impulse
/// sequence, relative to a single unit impulse (1 means unshaped).
pub fn residual_vibration_pct(shaper: &Shaper, omega_n: f64, zeta: f64) -> f64 {
    let wd = omega_n * (1.0 - zeta * zeta).sqrt();
    let s_n = zeta * omega_n;
    let t_last = shaper.delay();
    // impulse weights are normalized by the decay at the last impulse to keep
    // the exponentials bounded
    let (mut c, mut s) = (0.0, 0.0);
    for (t, a) in shaper.times.iter().zip(&shaper.amplitudes) {
        let e = a * (s_n * (t - t_last)).exp();
        c += e * (wd * t).cos();
        s += e * (wd * t).sin();
    }
    (c * c + s * s).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapingSpace {
    Joint,
    /// Translation of `{b}` only; the orientation must stay constant.
    Operational,
}

impl ShapingSpace {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(ShapingSpace::Joint),
            "operational" => Ok(ShapingSpace::Operational),
            other => Err(Error::invalid(format!("unknown shaping space '{other}'"))),
        }
    }
}

/// Placement of the shifted copies of the trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImpulseTiming {
    /// Impulse times used as they are; the output knots are the union of the shifted input knots.
    Exact,
    /// Impulse times rounded to the input's sampling step; the output stays on that grid.
    Rounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapedTrajectory {
    pub trajectory: JointTrajectory,
    /// Added motion time.
    pub delay: f64,
}

/// Convolves a rest-to-rest trajectory with `shaper`.
pub fn shape_trajectory(
    traj: &JointTrajectory,
    shaper: &Shaper,
    space: ShapingSpace,
    timing: ImpulseTiming,
    chain: Option<&ChainModel>,
) -> Result<ShapedTrajectory> {
    let dt = traj
        .uniform_step(1e-9 * traj.duration().max(1.0))
        .ok_or_else(|| Error::invalid("shaping needs a uniformly sampled trajectory"))?;
    if traj.velocities()[0].iter().any(|v| v.abs() > 1e-12) {
        return Err(Error::invalid("shaping needs a trajectory starting at rest"));
    }
    if shaper.is_identity() {
        return Ok(ShapedTrajectory {
            trajectory: traj.clone(),
            delay: 0.0,
        });
    }
    let times: Vec<f64> = match timing {
        ImpulseTiming::Exact => shaper.times.clone(),
        ImpulseTiming::Rounded => shaper.times.iter().map(|t| (t / dt).round() * dt).collect(),
    };
    let shifted = Shaper {
        times: times.clone(),
        amplitudes: shaper.amplitudes.clone(),
    };
    match space {
        ShapingSpace::Joint => {
            let trajectory = convolve_joint(traj, &shifted)?;
            Ok(ShapedTrajectory {
                trajectory,
                delay: shifted.delay(),
            })
        }
        ShapingSpace::Operational => {
            let chain = chain.ok_or_else(|| Error::invalid("operational-space shaping needs the chain model"))?;
            let trajectory = convolve_operational(chain, traj, &shifted, dt.min(1e-3))?;
            Ok(ShapedTrajectory {
                trajectory,
                delay: shifted.delay(),
            })
        }
    }
}

fn merged_knots(traj: &JointTrajectory, shaper: &Shaper) -> Vec<f64> {
    let t0 = traj.start_time();
    let mut knots: Vec<f64> = shaper
        .times
        .iter()
        .flat_map(|s| traj.times().iter().map(move |t| t + s))
        .collect();
    knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tol = 1e-12 * (1.0 + traj.duration());
    knots.dedup_by(|a, b| (*a - *b).abs() <= tol);
    debug_assert!(knots[0] == t0);
    knots
}

/// `u_s(t) = sum_i A_i u(t - t_i)` with `u` zero before the start.
fn convolve_joint(traj: &JointTrajectory, shaper: &Shaper) -> Result<JointTrajectory> {
    let n = traj.n_dof();
    let t0 = traj.start_time();
    let knots = merged_knots(traj, shaper);
    let mut u = Vec::with_capacity(knots.len());
    for j in 0..knots.len() {
        let probe = if j + 1 < knots.len() {
            0.5 * (knots[j] + knots[j + 1])
        } else {
            knots[j] + 1.0
        };
        let mut uj = vec![0.0; n];
        for (s, a) in shaper.times.iter().zip(&shaper.amplitudes) {
            let tau = probe - s;
            if tau < t0 {
                continue;
            }
            for (acc, v) in uj.iter_mut().zip(traj.acceleration_at(tau)) {
                *acc += a * v;
            }
        }
        u.push(uj);
    }
    JointTrajectory::from_accelerations(knots, traj.positions()[0].clone(), vec![0.0; n], u)
}

/// Shapes the translation of `{b}` and resolves it back to joint motion with
/// a resolved-acceleration law (pseudo-inverse of the geometric Jacobian,
/// orientation held) integrated on a grid of step `h`.
fn convolve_operational(chain: &ChainModel, traj: &JointTrajectory, shaper: &Shaper, h: f64) -> Result<JointTrajectory> {
    let n = traj.n_dof();
    let zero = vec![0.0; n];
    let r0 = frame_pva(chain, &traj.positions()[0], &zero, &zero)?.r;
    for q in traj.positions() {
        let r = frame_pva(chain, q, &zero, &zero)?.r;
        if orientation_error(&r, &r0)?.norm() > 1e-6 {
            return Err(Error::invalid(
                "operational-space shaping supports translation-only motions; use joint space",
            ));
        }
    }
    let t0 = traj.start_time();
    let t_end = traj.end_time();
    // Cartesian reference of the original motion
    let reference = |t: f64| -> Result<(Vector3<f64>, Vector3<f64>, Vector3<f64>)> {
        let tc = t.min(t_end);
        let (q, qd) = traj.state_at(tc);
        let u = if t >= t_end { zero.clone() } else { traj.acceleration_at(tc).to_vec() };
        let f = frame_pva(chain, &q, &qd, &u)?;
        Ok((f.p, f.v, f.a))
    };
    let shaped = |t: f64| -> Result<(Vector3<f64>, Vector3<f64>, Vector3<f64>)> {
        let (mut p, mut v, mut a) = (Vector3::zeros(), Vector3::zeros(), Vector3::zeros());
        for (s, amp) in shaper.times.iter().zip(&shaper.amplitudes) {
            let (pi, vi, ai) = reference((t - s).max(t0))?;
            p += pi * *amp;
            if t - s >= t0 {
                v += vi * *amp;
                a += ai * *amp;
            }
        }
        Ok((p, v, a))
    };
    let total = t_end - t0 + shaper.delay();
    let steps = (total / h).ceil() as usize;
    let h = total / steps as f64;
    let (kp, kd) = (400.0, 40.0);
    let mut q = traj.positions()[0].clone();
    let mut qd = zero.clone();
    let mut t = Vec::with_capacity(steps + 1);
    let mut u = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let tk = t0 + k as f64 * h;
        t.push(tk);
        if k == steps {
            u.push(zero.clone());
            break;
        }
        let (pd, vd, ad) = shaped(tk + 0.5 * h)?;
        let cur = frame_pva(chain, &q, &qd, &zero)?;
        let mut jac = DMatrix::<f64>::zeros(6, n);
        for i in 0..n {
            let mut e = zero.clone();
            e[i] = 1.0;
            let col = frame_pva(chain, &q, &zero, &e)?;
            for r in 0..3 {
                jac[(r, i)] = col.a[r];
                jac[(r + 3, i)] = col.alpha[r];
            }
        }
        let ep = pd - cur.p;
        let ev = vd - cur.v;
        let eo = -orientation_error(&cur.r, &r0)?;
        let lin = ad + ev * kd + ep * kp - cur.a;
        let ang = -cur.omega * kd + eo * kp - cur.alpha;
        let rhs = DVector::from_iterator(6, lin.iter().chain(ang.iter()).copied());
        let sol = jac
            .svd(true, true)
            .solve(&rhs, 1e-9)
            .map_err(|e| Error::invalid(format!("pseudo-inverse failed: {e}")))?;
        let uk: Vec<f64> = sol.iter().copied().collect();
        for i in 0..n {
            q[i] += h * qd[i] + 0.5 * h * h * uk[i];
            qd[i] += h * uk[i];
        }
        u.push(uk);
    }
    JointTrajectory::from_accelerations(t, traj.positions()[0].clone(), zero, u)
}
