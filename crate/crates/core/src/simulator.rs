//! Open-loop rollouts of joint trajectories on the arm + pendulum model, the
//! residual-vibration metric and the controller comparison harness.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::beam_model::{
    default_gravity, emulated_joint_torque, equilibrium_theta, linearize_at, pendulum_accel, LinearizedMode, setup_dynamics_generic,
    PendulumParams,
};
use crate::error::{Error, Result};
use crate::estimation::TimeSeries;
use crate::input_shaping::{shape_trajectory, zv_shaper, ImpulseTiming, ShapingSpace};
use crate::kinematics::{forward_kinematics, frame_pva, ChainModel, FramePva};
use crate::nlp_solver::{solve_ocp, SolverConfig};
use crate::trajectory::JointTrajectory;
use crate::transcription::{rk4_step, OcpKind, OcpSolution, OcpSpec};

/// Pendulum model used as the simulated plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plant {
    Nonlinear,
    /// Linearized about the start configuration and the pendulum equilibrium
    /// there: constant Jacobian, no velocity-product terms.
    Linearized,
}

impl Plant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "nonlinear" => Ok(Plant::Nonlinear),
            "linear" | "linearized" => Ok(Plant::Linearized),
            other => Err(Error::invalid(format!("unknown plant '{other}' (expected nonlinear or linear)"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Plant::Nonlinear => "nonlinear",
            Plant::Linearized => "linear",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutOptions {
    /// Largest integration step (s).
    pub dt: f64,
    /// Observation window after the motion (s).
    pub t_r: f64,
    pub gravity: Vector3<f64>,
    pub plant: Plant,
}

impl Default for RolloutOptions {
    fn default() -> Self {
        RolloutOptions {
            dt: 1e-3,
            t_r: 5.0,
            gravity: default_gravity(),
            plant: Plant::Nonlinear,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutResult {
    pub t: Vec<f64>,
    pub q: Vec<Vec<f64>>,
    pub qd: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
    pub theta_dot: Vec<f64>,
    pub tau: Vec<f64>,
    /// End of the motion.
    pub tf: f64,
    pub t_r: f64,
    /// Pendulum equilibrium at the final pose.
    pub theta_eq_final: f64,
}

impl RolloutResult {
    /// Index of the sample at the end of the motion.
    pub fn tf_index(&self) -> usize {
        let tol = 1e-9 * (1.0 + self.tf.abs());
        self.t.iter().position(|t| *t >= self.tf - tol).unwrap_or(self.t.len() - 1)
    }

    pub fn torque_series(&self) -> Result<TimeSeries> {
        TimeSeries::new(self.t.clone(), self.tau.clone())
    }

    /// Columns `t, theta, theta_dot, tau, q*, qd*, u*`.
    pub fn to_csv(&self) -> String {
        let n = self.q.first().map_or(0, Vec::len);
        let mut s = String::from("t,theta,theta_dot,tau");
        for prefix in ["q", "qd", "u"] {
            for i in 1..=n {
                let _ = write!(s, ",{prefix}{i}");
            }
        }
        s.push('\n');
        for k in 0..self.t.len() {
            let _ = write!(s, "{},{},{},{}", self.t[k], self.theta[k], self.theta_dot[k], self.tau[k]);
            for v in self.q[k].iter().chain(&self.qd[k]).chain(&self.u[k]) {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }
}

struct LinearPlant {
    theta_eq: f64,
    omega: f64,
    zeta: f64,
    /// `theta_ddot` forcing per unit joint acceleration.
    gain: Vec<f64>,
}

impl LinearPlant {
    fn new(chain: &ChainModel, params: &PendulumParams, q0: &[f64], g: &Vector3<f64>) -> Result<Self> {
        let n = q0.len();
        let zero = vec![0.0; n];
        let r0 = frame_pva(chain, q0, &zero, &zero)?.r;
        let mode = linearize_at(params, &r0, g)?;
        // forcing of the full model at equilibrium without gravity and spring
        // terms, which is linear in u when the joint rates vanish
        let mut gain = Vec::with_capacity(n);
        let base = {
            let f = FramePva::stationary(r0);
            pendulum_accel(params, &f, mode.theta_eq, 0.0, &Vector3::zeros())
        };
        for i in 0..n {
            let mut e = zero.clone();
            e[i] = 1.0;
            let f = frame_pva(chain, q0, &zero, &e)?;
            gain.push(pendulum_accel(params, &f, mode.theta_eq, 0.0, &Vector3::zeros()) - base);
        }
        Ok(LinearPlant {
            theta_eq: mode.theta_eq,
            omega: mode.omega,
            zeta: mode.zeta,
            gain,
        })
    }

    fn accel(&self, theta: f64, theta_dot: f64, u: &[f64]) -> f64 {
        let forcing: f64 = self.gain.iter().zip(u).map(|(g, u)| g * u).sum();
        -2.0 * self.zeta * self.omega * theta_dot - self.omega * self.omega * (theta - self.theta_eq) + forcing
    }
}

/// Simulates the pendulum driven by `traj` (executed exactly) from rest at its
/// equilibrium, then keeps the arm at the final pose for `t_r` seconds.
pub fn rollout(
    chain: &ChainModel,
    params: &PendulumParams,
    traj: &JointTrajectory,
    opts: &RolloutOptions,
) -> Result<RolloutResult> {
    let n = chain.n_dof();
    Error::check_len("trajectory joints", n, traj.n_dof())?;
    if !(opts.dt > 0.0 && opts.t_r >= 0.0) {
        return Err(Error::invalid("rollout step must be positive and the window nonnegative"));
    }
    let usage = traj.limit_usage(&chain.limits);
    if !usage.within(1e-6) {
        log::warn!("trajectory exceeds joint limits: {usage:?}");
    }
    let g = opts.gravity;
    let zero = vec![0.0; n];
    let q0 = traj.positions()[0].clone();
    let r0 = frame_pva(chain, &q0, &zero, &zero)?.r;
    let r_end = frame_pva(chain, traj.final_position(), &zero, &zero)?.r;
    let linear = match opts.plant {
        Plant::Linearized => Some(LinearPlant::new(chain, params, &q0, &g)?),
        Plant::Nonlinear => None,
    };
    let (theta0, theta_eq_final) = match &linear {
        Some(lp) => (lp.theta_eq, lp.theta_eq),
        None => (equilibrium_theta(params, &r0, &g)?, equilibrium_theta(params, &r_end, &g)?),
    };

    let mut x: Vec<f64> = q0.iter().copied().chain([theta0]).chain(traj.velocities()[0].iter().copied()).chain([0.0]).collect();
    let f = |x: &[f64], u: &[f64], out: &mut [f64]| match &linear {
        Some(lp) => {
            out[..n].copy_from_slice(&x[n + 1..2 * n + 1]);
            out[n] = x[2 * n + 1];
            out[n + 1..2 * n + 1].copy_from_slice(u);
            out[2 * n + 1] = lp.accel(x[n], x[2 * n + 1], u);
        }
        None => setup_dynamics_generic(chain, params, x, u, &g, out),
    };

    let mut res = RolloutResult {
        t: Vec::new(),
        q: Vec::new(),
        qd: Vec::new(),
        u: Vec::new(),
        theta: Vec::new(),
        theta_dot: Vec::new(),
        tau: Vec::new(),
        tf: traj.end_time(),
        t_r: opts.t_r,
        theta_eq_final,
    };
    let mut record = |t: f64, x: &[f64], u: &[f64]| -> Result<()> {
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged { time: t });
        }
        res.t.push(t);
        res.q.push(x[..n].to_vec());
        res.qd.push(x[n + 1..2 * n + 1].to_vec());
        res.u.push(u.to_vec());
        res.theta.push(x[n]);
        res.theta_dot.push(x[2 * n + 1]);
        res.tau.push(emulated_joint_torque(params, x[n], x[2 * n + 1]));
        Ok(())
    };

    let times = traj.times();
    for j in 0..times.len() - 1 {
        let u = &traj.accelerations()[j];
        let len = times[j + 1] - times[j];
        let m = ((len / opts.dt) - 1e-9).ceil().max(1.0) as usize;
        let h = len / m as f64;
        for s in 0..m {
            record(times[j] + s as f64 * h, &x, u)?;
            x = rk4_step(f, &x, u, h);
        }
    }
    // hold the final pose
    for v in &mut x[n + 1..2 * n + 1] {
        *v = 0.0;
    }
    let steps = (opts.t_r / opts.dt).round() as usize;
    let h = if steps > 0 { opts.t_r / steps as f64 } else { 0.0 };
    let t_end = traj.end_time();
    for s in 0..steps {
        record(t_end + s as f64 * h, &x, &zero)?;
        x = rk4_step(f, &x, &zero, h);
    }
    record(t_end + opts.t_r, &x, &zero)?;
    Ok(res)
}

/// Linearized pendulum mode with the arm at rest in `q`.
pub fn linearized_mode_at(
    chain: &ChainModel,
    params: &PendulumParams,
    q: &[f64],
    g: &Vector3<f64>,
) -> Result<LinearizedMode> {
    let r = forward_kinematics(chain, q)?.rotation;
    linearize_at(params, &r, g)
}

/// Free decay of the pendulum on a frame at rest with orientation `r_b`,
/// started `offset` rad away from equilibrium; returns the emulated torque.
pub fn free_decay(
    params: &PendulumParams,
    r_b: &Matrix3<f64>,
    g: &Vector3<f64>,
    offset: f64,
    duration: f64,
    dt: f64,
) -> Result<TimeSeries> {
    let theta_eq = equilibrium_theta(params, r_b, g)?;
    let frame = FramePva::stationary(*r_b);
    let steps = (duration / dt).round() as usize;
    let mut x = vec![theta_eq + offset, 0.0];
    let (mut t, mut y) = (Vec::with_capacity(steps + 1), Vec::with_capacity(steps + 1));
    let f = |x: &[f64], _u: &[f64], out: &mut [f64]| {
        out[0] = x[1];
        out[1] = pendulum_accel(params, &frame, x[0], x[1], g);
    };
    for k in 0..=steps {
        t.push(k as f64 * dt);
        y.push(emulated_joint_torque(params, x[0], x[1]));
        x = rk4_step(f, &x, &[], dt);
    }
    TimeSeries::new(t, y)
}

/// `V = integral over [t_f, t_f + t_r] of |tau - mean(tau)|` (trapezoidal).
pub fn residual_metric(result: &RolloutResult) -> f64 {
    let k0 = result.tf_index();
    residual_integral(&result.t[k0..], &result.tau[k0..])
}

/// Trapezoidal integral of the absolute deviation from the (time-weighted) mean.
pub fn residual_integral(t: &[f64], y: &[f64]) -> f64 {
    if t.len() < 2 {
        return 0.0;
    }
    let span = t[t.len() - 1] - t[0];
    let area: f64 = (1..t.len()).map(|k| 0.5 * (y[k] + y[k - 1]) * (t[k] - t[k - 1])).sum();
    let mean = area / span;
    (1..t.len())
        .map(|k| 0.5 * ((y[k] - mean).abs() + (y[k - 1] - mean).abs()) * (t[k] - t[k - 1]))
        .sum()
}

/// Which rows a comparison produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowSelection {
    pub aocp: bool,
    pub ocp: bool,
    pub zv: bool,
}

impl Default for RowSelection {
    fn default() -> Self {
        RowSelection {
            aocp: true,
            ocp: true,
            zv: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompareSetup {
    pub name: String,
    /// Problem template; its pendulum parameters are the planning model.
    pub spec: OcpSpec,
    /// Parameters of the simulated plant.
    pub plant: PendulumParams,
    pub travel_times: [f64; 3],
    /// Replace the third travel time by the ZV-shaped duration.
    pub align_tf3_with_zv: bool,
    pub rollout: RolloutOptions,
    pub solver: SolverConfig,
    pub rows: RowSelection,
    pub shaping_space: ShapingSpace,
    /// Threads used for independent sub-runs.
    pub workers: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub controller: String,
    pub travel_time: f64,
    pub v: Option<f64>,
    pub ratio_pct: Option<f64>,
    pub status: String,
    pub within_limits: Option<bool>,
    pub solver_outer_iterations: Option<usize>,
    pub solver_inner_iterations: Option<usize>,
    pub constraint_violation: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VibrationReport {
    pub task: String,
    pub travel_times: [f64; 3],
    pub shaper_omega: f64,
    pub shaper_zeta: f64,
    pub rows: Vec<ReportRow>,
    #[serde(skip)]
    pub rollouts: Vec<Option<RolloutResult>>,
    #[serde(skip)]
    pub solutions: Vec<Option<OcpSolution>>,
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.prec$}"))
}

impl VibrationReport {
    pub fn row(&self, controller: &str, travel_time: f64) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.controller == controller && (r.travel_time - travel_time).abs() < 1e-9)
    }

    pub fn to_table(&self) -> String {
        let header = ["controller", "t_f [s]", "V", "V/V_aOCP [%]", "limits", "status"];
        let body: Vec<[String; 6]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.controller.clone(),
                    format!("{:.4}", r.travel_time),
                    r.v.map_or_else(|| "-".into(), |v| format!("{v:.6e}")),
                    fmt_opt(r.ratio_pct, 3),
                    r.within_limits.map_or("-".into(), |ok| if ok { "ok".into() } else { "exceeded".into() }),
                    r.status.clone(),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &body {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut s = format!("task: {}\n", self.task);
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        s.push_str(&line(&header.map(String::from)));
        s.push('\n');
        for row in &body {
            s.push_str(&line(row));
            s.push('\n');
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("controller,travel_time,v,ratio_pct,within_limits,status\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.controller,
                r.travel_time,
                r.v.map_or(String::new(), |v| v.to_string()),
                r.ratio_pct.map_or(String::new(), |v| v.to_string()),
                r.within_limits.map_or(String::new(), |v| v.to_string()),
                r.status
            );
        }
        s
    }
}

struct RowOutcome {
    row: ReportRow,
    rollout: Option<RolloutResult>,
    solution: Option<OcpSolution>,
}

fn run_solution(setup: &CompareSetup, label: &str, sol: Result<OcpSolution>) -> RowOutcome {
    let tf = sol.as_ref().map(|s| s.tf()).unwrap_or(f64::NAN);
    let mut row = ReportRow {
        controller: label.to_string(),
        travel_time: tf,
        v: None,
        ratio_pct: None,
        status: String::new(),
        within_limits: None,
        solver_outer_iterations: None,
        solver_inner_iterations: None,
        constraint_violation: None,
    };
    let sol = match sol {
        Ok(s) => s,
        Err(e) => {
            row.status = format!("error: {e}");
            return RowOutcome { row, rollout: None, solution: None };
        }
    };
    row.solver_outer_iterations = Some(sol.report.outer_iterations);
    row.solver_inner_iterations = Some(sol.report.inner_iterations);
    row.constraint_violation = Some(sol.violation);
    row.status = sol.report.status.as_str().to_string();
    if !sol.report.converged() {
        return RowOutcome { row, rollout: None, solution: Some(sol) };
    }
    let traj = match sol.to_joint_trajectory() {
        Ok(t) => t,
        Err(e) => {
            row.status = format!("error: {e}");
            return RowOutcome { row, rollout: None, solution: Some(sol) };
        }
    };
    row.within_limits = Some(traj.limit_usage(&setup.spec.chain.limits).within(1e-6));
    match rollout(&setup.spec.chain, &setup.plant, &traj, &setup.rollout) {
        Ok(r) => {
            row.v = Some(residual_metric(&r));
            RowOutcome { row, rollout: Some(r), solution: Some(sol) }
        }
        Err(e) => {
            row.status = format!("error: {e}");
            RowOutcome { row, rollout: None, solution: Some(sol) }
        }
    }
}

/// Travel times actually used, and the ZV shaper mode `(omega, zeta)` of the
/// planning model at the target pose.
pub fn comparison_schedule(setup: &CompareSetup) -> Result<([f64; 3], f64, f64)> {
    let model = setup
        .spec
        .params
        .as_ref()
        .ok_or_else(|| Error::invalid("comparison needs pendulum parameters in the task"))?;
    let mode = linearize_at(model, &setup.spec.target_rotation, &setup.spec.gravity)?;
    let shaper = zv_shaper(mode.omega, mode.zeta)?;
    let mut tf = setup.travel_times;
    if setup.align_tf3_with_zv {
        tf[2] = tf[0] + shaper.delay();
    }
    if !(tf[0] > 0.0 && tf[0] < tf[1] && tf[1] < tf[2]) {
        return Err(Error::invalid(format!(
            "travel times must satisfy 0 < t_f1 < t_f2 < t_f3, got {:?}",
            tf
        )));
    }
    Ok((tf, mode.omega, mode.zeta))
}

/// Runs aOCP at `t_f1`, the OCP at the three travel times and the ZV-shaped
/// aOCP motion; sub-run failures are recorded in their rows.
pub fn compare_controllers(setup: &CompareSetup) -> Result<VibrationReport> {
    let (tf, omega, zeta) = comparison_schedule(setup)?;
    let mut outcomes: Vec<RowOutcome> = Vec::new();

    let arm_spec = {
        let mut s = setup.spec.with_tf(tf[0]);
        s.params = None;
        s
    };
    let arm = run_solution(setup, "aOCP", solve_ocp(&arm_spec, OcpKind::ArmOnly, &setup.solver, None));
    let v_ref = arm.row.v;
    let arm_solution = arm.solution.clone().filter(|s| s.report.converged());
    let arm_row_index = setup.rows.aocp.then_some(0);
    outcomes.push(arm);

    if setup.rows.ocp {
        let runs = parallel_map(&tf, setup.workers, |&t| {
            let spec = setup.spec.with_tf(t);
            let sol = solve_ocp(&spec, OcpKind::Full, &setup.solver, arm_solution.as_ref());
            let mut out = run_solution(setup, "OCP", sol);
            out.row.travel_time = t;
            out
        });
        outcomes.extend(runs);
    }
    if setup.rows.zv {
        let mut row = ReportRow {
            controller: "ZV IS".into(),
            travel_time: tf[2],
            v: None,
            ratio_pct: None,
            status: String::new(),
            within_limits: None,
            solver_outer_iterations: None,
            solver_inner_iterations: None,
            constraint_violation: None,
        };
        let mut ro = None;
        match &arm_solution {
            None => row.status = "error: no arm-only solution to shape".into(),
            Some(sol) => {
                let shaped = zv_shaper(omega, zeta).and_then(|shaper| {
                    let traj = sol.to_joint_trajectory()?;
                    shape_trajectory(&traj, &shaper, setup.shaping_space, ImpulseTiming::Exact, Some(&setup.spec.chain))
                });
                match shaped.and_then(|s| {
                    let usage = s.trajectory.limit_usage(&setup.spec.chain.limits);
                    let r = rollout(&setup.spec.chain, &setup.plant, &s.trajectory, &setup.rollout)?;
                    Ok((s, usage, r))
                }) {
                    Ok((s, usage, r)) => {
                        row.travel_time = s.trajectory.duration();
                        row.within_limits = Some(usage.within(1e-6));
                        row.v = Some(residual_metric(&r));
                        row.status = "ok".into();
                        ro = Some(r);
                    }
                    Err(e) => row.status = format!("error: {e}"),
                }
            }
        }
        outcomes.push(RowOutcome { row, rollout: ro, solution: None });
    }
    if arm_row_index.is_none() {
        outcomes.remove(0);
    }
    let mut report = VibrationReport {
        task: setup.name.clone(),
        travel_times: tf,
        shaper_omega: omega,
        shaper_zeta: zeta,
        rows: Vec::new(),
        rollouts: Vec::new(),
        solutions: Vec::new(),
    };
    for mut o in outcomes {
        if let (Some(v), Some(v0)) = (o.row.v, v_ref) {
            if v0 > 0.0 {
                o.row.ratio_pct = Some(100.0 * v / v0);
            }
        }
        report.rows.push(o.row);
        report.rollouts.push(o.rollout);
        report.solutions.push(o.solution);
    }
    Ok(report)
}

/// Maps `f` over `items` on up to `workers` threads; results keep input order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut out: Vec<(usize, R)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if i >= items.len() {
                            break done;
                        }
                        done.push((i, f(&items[i])));
                    }
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    });
    out.sort_by_key(|(i, _)| *i);
    out.into_iter().map(|(_, r)| r).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam_model::Orientation;

    #[test]
    fn parallel_map_keeps_order() {
        let v: Vec<usize> = (0..37).collect();
        assert_eq!(parallel_map(&v, 4, |x| x * 2), parallel_map(&v, 1, |x| x * 2));
        assert!(parallel_map(&Vec::<usize>::new(), 3, |x| *x).is_empty());
    }

    #[test]
    fn metric_of_sine_over_whole_periods() {
        let w = 2.0 * std::f64::consts::PI * 3.0;
        let t_r = 2.0;
        let t: Vec<f64> = (0..=20000).map(|k| k as f64 * 1e-4).collect();
        let y: Vec<f64> = t.iter().map(|t| (w * t).sin()).collect();
        let v = residual_integral(&t, &y);
        assert!((v - 2.0 / std::f64::consts::PI * t_r).abs() < 1e-6);
        let y2: Vec<f64> = y.iter().map(|v| 2.0 * v + 7.0).collect();
        assert!((residual_integral(&t, &y2) - 2.0 * v).abs() < 1e-9);
        assert!(residual_integral(&t, &vec![3.0; t.len()]) < 1e-10);
    }

    #[test]
    fn free_decay_rings_at_linearized_frequency() {
        let p = PendulumParams::new(18.44, 0.007, 0.52, 0.08).unwrap();
        let g = default_gravity();
        let r = Orientation::O2.rotation();
        let s = free_decay(&p, &r, &g, 0.01, 3.0, 1e-3).unwrap();
        let est = crate::estimation::identify(&s, &Default::default()).unwrap();
        let w = crate::beam_model::linearized_frequency(&p, Orientation::O2).unwrap();
        assert!((est.omega_n / w - 1.0).abs() < 2e-3, "{} vs {}", est.omega_n, w);
    }
}
