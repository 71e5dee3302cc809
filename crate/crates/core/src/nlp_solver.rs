//! Augmented Lagrangian solver for smooth NLPs with box bounds.
//!
//! Equality rows enter a classical augmented Lagrangian, two-sided inequality
//! rows a Powell-Hestenes-Rockafellar term, and the box bounds are kept by
//! projection. Each subproblem is minimized by a projected limited-memory
//! BFGS method whose initial matrix is a banded Gauss-Newton model of the
//! merit function (objective Hessian approximation plus `mu J^T J`) when the
//! problem supplies one.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::kinematics::{forward_kinematics, orientation_error, pose_generic, orientation_error_generic};
use crate::linalg::{BandCholesky, BandMatrix, SparseMatrix};
use crate::scalar::{Dual, Real};
use crate::transcription::{build_nlp, Nlp, OcpKind, OcpSolution, OcpSpec};

/// A smooth NLP: `min f(z)` s.t. `c(z) = 0`, `lo <= g(z) <= hi`, `lb <= z <= ub`.
pub trait NlpProblem {
    fn n_vars(&self) -> usize;
    fn n_eq(&self) -> usize;
    fn n_ineq(&self) -> usize {
        0
    }
    fn bounds(&self) -> (&[f64], &[f64]);
    fn ineq_bounds(&self) -> (&[f64], &[f64]) {
        (&[], &[])
    }
    fn objective(&self, z: &[f64]) -> f64;
    /// Writes the gradient and returns the objective value.
    fn objective_gradient(&self, z: &[f64], grad: &mut [f64]) -> f64;
    /// Equality residuals followed by the inequality row values.
    fn constraints(&self, z: &[f64], out: &mut [f64]);
    /// Jacobian of all constraint rows, same order as `constraints`.
    fn jacobian(&self, z: &[f64]) -> SparseMatrix;
    /// Lower-triangle entries of a positive semidefinite objective Hessian model.
    fn objective_hessian(&self, _z: &[f64]) -> Option<Vec<(usize, usize, f64)>> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tol_constraint: f64,
    pub tol_stationarity: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub memory: usize,
    pub mu0: f64,
    pub mu_growth: f64,
    /// Required violation ratio between accepted outer iterates.
    pub reduction: f64,
    pub mu_max: f64,
    /// Consecutive rejected outer iterations before declaring a stall.
    pub stall_limit: usize,
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Use the banded Gauss-Newton model as initial L-BFGS matrix.
    pub structured_seed: bool,
    pub trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol_constraint: 1e-6,
            tol_stationarity: 1e-5,
            max_outer: 50,
            max_inner: 500,
            memory: 20,
            mu0: 10.0,
            mu_growth: 10.0,
            reduction: 0.25,
            mu_max: 1e12,
            stall_limit: 8,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 40,
            structured_seed: true,
            trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            self.tol_constraint,
            self.tol_stationarity,
            self.mu0,
            self.armijo,
            self.backtrack,
            self.mu_max,
        ];
        if pos.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("solver parameters must be positive"));
        }
        if self.tol_constraint >= 1.0 || self.tol_stationarity >= 1.0 {
            return Err(Error::invalid("solver tolerances must be below 1"));
        }
        if self.max_outer == 0 || self.max_inner == 0 || self.memory == 0 || self.max_backtracks == 0 {
            return Err(Error::invalid("iteration limits and memory must be positive"));
        }
        if !(self.mu_growth > 1.0) || !(self.reduction > 0.0 && self.reduction < 1.0) {
            return Err(Error::invalid("penalty growth must exceed 1 and the reduction ratio lie in (0, 1)"));
        }
        if !(self.armijo < 0.5 && self.backtrack < 1.0) {
            return Err(Error::invalid("line search parameters out of range"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    InfeasibleStall,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIterations => "max_iter",
            SolveStatus::InfeasibleStall => "infeasible-stall",
        }
    }
}

/// One outer iteration of the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub outer: usize,
    pub inner_iterations: usize,
    pub penalty: f64,
    pub objective: f64,
    pub violation: f64,
    pub stationarity: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub objective: f64,
    pub violation: f64,
    pub stationarity: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub penalty: f64,
    pub wall_time: Duration,
    pub trace: Vec<TraceRow>,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    pub fn trace_csv(&self) -> String {
        let mut s = String::from("outer,inner_iterations,penalty,objective,violation,stationarity,accepted\n");
        for r in &self.trace {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.outer, r.inner_iterations, r.penalty, r.objective, r.violation, r.stationarity, r.accepted
            ));
        }
        s
    }
}

fn project(z: &mut [f64], lb: &[f64], ub: &[f64]) {
    for i in 0..z.len() {
        z[i] = z[i].max(lb[i]).min(ub[i]);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn masked_dot(a: &[f64], b: &[f64], free: &[bool]) -> f64 {
    a.iter()
        .zip(b)
        .zip(free)
        .filter(|(_, f)| **f)
        .map(|((x, y), _)| x * y)
        .sum()
}

/// Scaled projected-gradient norm `|P(z - g) - z|_inf / (1 + |f|)`.
pub fn projected_gradient_norm(z: &[f64], g: &[f64], lb: &[f64], ub: &[f64]) -> f64 {
    (0..z.len())
        .map(|i| ((z[i] - g[i]).max(lb[i]).min(ub[i]) - z[i]).abs())
        .fold(0.0, f64::max)
}

enum Seed {
    Scalar(f64),
    Banded(BandCholesky),
}

struct Merit {
    value: f64,
    f: f64,
    c: Vec<f64>,
}

struct Al<'a, P: NlpProblem + ?Sized> {
    p: &'a P,
    cfg: &'a SolverConfig,
    lb: &'a [f64],
    ub: &'a [f64],
    ilo: &'a [f64],
    ihi: &'a [f64],
    n_eq: usize,
    lambda: Vec<f64>,
    nu_lo: Vec<f64>,
    nu_hi: Vec<f64>,
    mu: f64,
    bandwidth: Option<usize>,
    outer: usize,
}

impl<P: NlpProblem + ?Sized> Al<'_, P> {
    fn violation(&self, c: &[f64]) -> f64 {
        let eq = c[..self.n_eq].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        c[self.n_eq..]
            .iter()
            .enumerate()
            .fold(eq, |m, (j, v)| m.max(v - self.ihi[j]).max(self.ilo[j] - v))
    }

    fn merit(&self, z: &[f64]) -> Result<Merit> {
        let f = self.p.objective(z);
        let mut c = vec![0.0; self.n_eq + self.ilo.len()];
        self.p.constraints(z, &mut c);
        let mu = self.mu;
        let mut value = f;
        for (ci, li) in c[..self.n_eq].iter().zip(&self.lambda) {
            value += li * ci + 0.5 * mu * ci * ci;
        }
        for (j, g) in c[self.n_eq..].iter().enumerate() {
            let hi = (self.nu_hi[j] + mu * (g - self.ihi[j])).max(0.0);
            let lo = (self.nu_lo[j] + mu * (self.ilo[j] - g)).max(0.0);
            value += (hi * hi - self.nu_hi[j].powi(2) + lo * lo - self.nu_lo[j].powi(2)) / (2.0 * mu);
        }
        if !value.is_finite() {
            return Err(Error::SolverDiverged {
                outer: self.outer,
                iterate: z.to_vec(),
            });
        }
        Ok(Merit { value, f, c })
    }

    /// Constraint weights `w` such that the merit gradient is `grad f + J^T w`.
    fn weights(&self, c: &[f64]) -> Vec<f64> {
        let mu = self.mu;
        let mut w: Vec<f64> = c[..self.n_eq]
            .iter()
            .zip(&self.lambda)
            .map(|(ci, li)| li + mu * ci)
            .collect();
        for (j, g) in c[self.n_eq..].iter().enumerate() {
            let hi = (self.nu_hi[j] + mu * (g - self.ihi[j])).max(0.0);
            let lo = (self.nu_lo[j] + mu * (self.ilo[j] - g)).max(0.0);
            w.push(hi - lo);
        }
        w
    }

    fn gradient(&self, z: &[f64], c: &[f64]) -> (Vec<f64>, SparseMatrix) {
        let mut g = vec![0.0; z.len()];
        self.p.objective_gradient(z, &mut g);
        let jac = self.p.jacobian(z);
        jac.tmul_add(&self.weights(c), &mut g);
        (g, jac)
    }

    fn free_set(&self, z: &[f64], g: &[f64]) -> Vec<bool> {
        (0..z.len())
            .map(|i| {
                let (l, u) = (self.lb[i], self.ub[i]);
                !(l == u || (z[i] <= l && g[i] > 0.0) || (z[i] >= u && g[i] < 0.0))
            })
            .collect()
    }

    fn build_seed(
        &mut self,
        z: &[f64],
        jac: &SparseMatrix,
        c: &[f64],
        free: &[bool],
        fallback: f64,
    ) -> Seed {
        let n = z.len();
        if !self.cfg.structured_seed {
            return Seed::Scalar(fallback);
        }
        let hess = self.p.objective_hessian(z);
        if hess.is_none() && jac.n_rows() == 0 {
            return Seed::Scalar(fallback);
        }
        let bw = *self.bandwidth.get_or_insert_with(|| {
            let hb = hess
                .as_ref()
                .map(|h| h.iter().map(|(i, j, _)| i.abs_diff(*j)).max().unwrap_or(0))
                .unwrap_or(0);
            hb.max(jac.coupling_bandwidth())
        });
        if (n as f64) * (bw as f64 + 1.0).powi(2) > 4e8 {
            return Seed::Scalar(fallback);
        }
        let mut b = BandMatrix::zeros(n, bw);
        match &hess {
            Some(h) => {
                for &(i, j, v) in h {
                    b.add(i, j, v);
                }
            }
            None => {
                for i in 0..n {
                    b.add(i, i, 1.0 / fallback);
                }
            }
        }
        let mu = self.mu;
        for r in 0..jac.n_rows() {
            let active = if r < self.n_eq {
                true
            } else {
                let j = r - self.n_eq;
                let g = c[r];
                self.nu_hi[j] + mu * (g - self.ihi[j]) > 0.0 || self.nu_lo[j] + mu * (self.ilo[j] - g) > 0.0
            };
            if !active {
                continue;
            }
            let (cols, vals) = jac.row(r);
            for a in 0..cols.len() {
                for bb in 0..=a {
                    b.add(cols[a], cols[bb], mu * vals[a] * vals[bb]);
                }
            }
        }
        let max_diag = (0..n).map(|i| b.diag(i)).fold(0.0_f64, f64::max);
        for (i, f) in free.iter().enumerate() {
            if !f {
                b.pin(i);
            }
        }
        let mut delta = 1e-10 * max_diag.max(1e-300) + 1e-12;
        for _ in 0..6 {
            let mut bt = b.clone();
            for i in 0..n {
                if free[i] {
                    bt.add(i, i, delta);
                }
            }
            if let Some(ch) = bt.cholesky() {
                return Seed::Banded(ch);
            }
            delta *= 100.0;
        }
        Seed::Scalar(fallback)
    }

    fn apply_seed(seed: &Seed, q: &[f64], free: &[bool]) -> Vec<f64> {
        match seed {
            Seed::Scalar(gamma) => q.iter().zip(free).map(|(v, f)| if *f { gamma * v } else { 0.0 }).collect(),
            Seed::Banded(ch) => {
                let mut r: Vec<f64> = q.iter().zip(free).map(|(v, f)| if *f { *v } else { 0.0 }).collect();
                ch.solve_in_place(&mut r);
                for (x, f) in r.iter_mut().zip(free) {
                    if !f {
                        *x = 0.0;
                    }
                }
                r
            }
        }
    }

    /// Minimizes the merit function for fixed multipliers and penalty.
    /// Returns (inner iterations, final merit, final stationarity, final jacobian-free state).
    fn inner(&mut self, z: &mut Vec<f64>, omega: f64) -> Result<(usize, Merit, f64)> {
        let n = z.len();
        let mut m = self.merit(z)?;
        let (mut g, mut jac) = self.gradient(z, &m.c);
        let mut mem: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::new();
        let mut iters = 0;
        let mut retried = false;
        loop {
            let stat = projected_gradient_norm(z, &g, self.lb, self.ub) / (1.0 + m.f.abs());
            if stat <= omega || iters >= self.cfg.max_inner {
                return Ok((iters, m, stat));
            }
            let free = self.free_set(z, &g);
            let gamma = mem
                .back()
                .map(|(s, y)| {
                    let yy = masked_dot(y, y, &free);
                    if yy > 0.0 {
                        (masked_dot(s, y, &free) / yy).max(1e-12)
                    } else {
                        1.0
                    }
                })
                .unwrap_or(1.0);
            let seed = self.build_seed(z, &jac, &m.c, &free, gamma);

            let mut d = self.two_loop(&g, &mem, &seed, &free);
            let gd = dot(&g, &d);
            let gnorm = masked_dot(&g, &g, &free).sqrt();
            let dnorm = dot(&d, &d).sqrt();
            if !(gd < -1e-14 * gnorm * dnorm) || !d.iter().all(|v| v.is_finite()) {
                mem.clear();
                d = Self::apply_seed(&seed, &g, &free).iter().map(|v| -v).collect();
                if !(dot(&g, &d) < 0.0) || !d.iter().all(|v| v.is_finite()) {
                    d = g.iter().zip(&free).map(|(v, f)| if *f { -v } else { 0.0 }).collect();
                }
            }

            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..self.cfg.max_backtracks {
                let mut zt: Vec<f64> = (0..n).map(|i| z[i] + alpha * d[i]).collect();
                project(&mut zt, self.lb, self.ub);
                let step: Vec<f64> = (0..n).map(|i| zt[i] - z[i]).collect();
                if step.iter().all(|v| *v == 0.0) {
                    break;
                }
                let slope = dot(&g, &step);
                if slope < 0.0 {
                    match self.merit(&zt) {
                        Ok(mt) if mt.value <= m.value + self.cfg.armijo * slope => {
                            accepted = Some((zt, mt, step));
                            break;
                        }
                        Ok(_) => {}
                        Err(Error::SolverDiverged { .. }) => {}
                        Err(e) => return Err(e),
                    }
                }
                alpha *= self.cfg.backtrack;
            }
            let Some((zt, mt, s)) = accepted else {
                if !mem.is_empty() && !retried {
                    mem.clear();
                    retried = true;
                    continue;
                }
                let stat = projected_gradient_norm(z, &g, self.lb, self.ub) / (1.0 + m.f.abs());
                return Ok((iters, m, stat));
            };
            retried = false;
            log::trace!(
                "inner {iters}: merit {:.9e} stat {:.3e} alpha {alpha:.1e} free {} banded {}",
                mt.value,
                projected_gradient_norm(z, &g, self.lb, self.ub) / (1.0 + m.f.abs()),
                free.iter().filter(|f| **f).count(),
                matches!(seed, Seed::Banded(_))
            );
            let (gn, jn) = self.gradient(&zt, &mt.c);
            let y: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
            let sy = dot(&s, &y);
            if sy > 1e-10 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
                if mem.len() == self.cfg.memory {
                    mem.pop_front();
                }
                mem.push_back((s, y));
            }
            *z = zt;
            m = mt;
            g = gn;
            jac = jn;
            iters += 1;
        }
    }

    fn two_loop(&self, g: &[f64], mem: &VecDeque<(Vec<f64>, Vec<f64>)>, seed: &Seed, free: &[bool]) -> Vec<f64> {
        let mut q: Vec<f64> = g.iter().zip(free).map(|(v, f)| if *f { *v } else { 0.0 }).collect();
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y) in mem.iter().rev() {
            let sy = masked_dot(s, y, free);
            if sy <= 0.0 {
                alphas.push(None);
                continue;
            }
            let a = masked_dot(s, &q, free) / sy;
            for i in 0..q.len() {
                if free[i] {
                    q[i] -= a * y[i];
                }
            }
            alphas.push(Some((a, sy)));
        }
        let mut r = Self::apply_seed(seed, &q, free);
        for ((s, y), a) in mem.iter().zip(alphas.iter().rev()) {
            if let Some((a, sy)) = a {
                let b = masked_dot(y, &r, free) / sy;
                for i in 0..r.len() {
                    if free[i] {
                        r[i] += s[i] * (a - b);
                    }
                }
            }
        }
        r.iter().map(|v| -v).collect()
    }

    fn update_multipliers(&mut self, c: &[f64]) {
        let mu = self.mu;
        for (l, ci) in self.lambda.iter_mut().zip(&c[..self.n_eq]) {
            *l += mu * ci;
        }
        for (j, g) in c[self.n_eq..].iter().enumerate() {
            self.nu_hi[j] = (self.nu_hi[j] + mu * (g - self.ihi[j])).max(0.0);
            self.nu_lo[j] = (self.nu_lo[j] + mu * (self.ilo[j] - g)).max(0.0);
        }
    }
}

/// Solves `p` from `z0` (projected onto the bounds first).
pub fn solve<P: NlpProblem + ?Sized>(p: &P, z0: &[f64], cfg: &SolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    let start = Instant::now();
    let n = p.n_vars();
    Error::check_len("initial guess", n, z0.len())?;
    let (lb, ub) = p.bounds();
    Error::check_len("lower bounds", n, lb.len())?;
    Error::check_len("upper bounds", n, ub.len())?;
    if (0..n).any(|i| !(lb[i] <= ub[i])) {
        return Err(Error::invalid("variable bounds are inconsistent"));
    }
    let (ilo, ihi) = p.ineq_bounds();
    Error::check_len("inequality bounds", p.n_ineq(), ilo.len())?;
    Error::check_len("inequality bounds", p.n_ineq(), ihi.len())?;

    let mut al = Al {
        p,
        cfg,
        lb,
        ub,
        ilo,
        ihi,
        n_eq: p.n_eq(),
        lambda: vec![0.0; p.n_eq()],
        nu_lo: vec![0.0; p.n_ineq()],
        nu_hi: vec![0.0; p.n_ineq()],
        mu: cfg.mu0,
        bandwidth: None,
        outer: 0,
    };
    let mut z = z0.to_vec();
    project(&mut z, lb, ub);

    let mut omega = cfg.tol_stationarity.max(1e-2);
    let mut best = f64::INFINITY;
    let mut accepted_history: Vec<f64> = Vec::new();
    let mut rejected_run = 0;
    let mut inner_total = 0;
    let mut trace = Vec::new();
    let mut status = SolveStatus::MaxIterations;
    let mut last = (f64::NAN, f64::INFINITY, f64::INFINITY);

    for outer in 1..=cfg.max_outer {
        al.outer = outer;
        let (iters, m, stat) = al.inner(&mut z, omega)?;
        inner_total += iters;
        let viol = al.violation(&m.c);
        last = (m.f, viol, stat);
        let converged = viol <= cfg.tol_constraint && stat <= cfg.tol_stationarity;
        let accept = viol <= cfg.tol_constraint.max(cfg.reduction * best);
        if cfg.trace {
            trace.push(TraceRow {
                outer,
                inner_iterations: iters,
                penalty: al.mu,
                objective: m.f,
                violation: viol,
                stationarity: stat,
                accepted: accept,
            });
        }
        log::debug!("outer {outer}: mu {:.1e} f {:.6e} viol {viol:.3e} stat {stat:.3e} inner {iters}", al.mu, m.f);
        if converged {
            al.update_multipliers(&m.c);
            status = SolveStatus::Converged;
            break;
        }
        if accept {
            // violation below the tolerance counts as the tolerance
            let clipped = viol.max(cfg.tol_constraint);
            if let Some(prev) = accepted_history.last() {
                debug_assert!(clipped <= *prev, "accepted violation increased: {clipped} > {prev}");
            }
            accepted_history.push(clipped);
            al.update_multipliers(&m.c);
            best = best.min(viol);
            omega = (omega * 0.1).max(cfg.tol_stationarity);
            rejected_run = 0;
        } else {
            al.mu *= cfg.mu_growth;
            rejected_run += 1;
            if al.mu > cfg.mu_max || rejected_run >= cfg.stall_limit {
                status = SolveStatus::InfeasibleStall;
                break;
            }
        }
    }
    let report = SolveReport {
        status,
        objective: last.0,
        violation: last.1,
        stationarity: last.2,
        outer_iterations: al.outer,
        inner_iterations: inner_total,
        penalty: al.mu,
        wall_time: start.elapsed(),
        trace,
    };
    Ok((z, report))
}

// ---------------------------------------------------------------------------
// goal configuration and warm starts

/// `min w |q - q_hint|^2` subject to reaching the target pose.
struct GoalProblem<'a> {
    spec: &'a OcpSpec,
    hint: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    weight: f64,
}

impl GoalProblem<'_> {
    fn residual<T: Real>(&self, q: &[T]) -> [T; 6] {
        let (p, r) = pose_generic(&self.spec.chain, q);
        let pt = &self.spec.target_position;
        let rt = nalgebra::Matrix3::from_fn(|i, j| T::cst(self.spec.target_rotation[(i, j)]));
        let e = orientation_error_generic(&r, &rt);
        [p.x - T::cst(pt.x), p.y - T::cst(pt.y), p.z - T::cst(pt.z), e.x, e.y, e.z]
    }
}

impl NlpProblem for GoalProblem<'_> {
    fn n_vars(&self) -> usize {
        self.hint.len()
    }
    fn n_eq(&self) -> usize {
        6
    }
    fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lb, &self.ub)
    }
    fn objective(&self, z: &[f64]) -> f64 {
        self.weight * z.iter().zip(&self.hint).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
    }
    fn objective_gradient(&self, z: &[f64], grad: &mut [f64]) -> f64 {
        for i in 0..z.len() {
            grad[i] = 2.0 * self.weight * (z[i] - self.hint[i]);
        }
        self.objective(z)
    }
    fn constraints(&self, z: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.residual(z));
    }
    fn jacobian(&self, z: &[f64]) -> SparseMatrix {
        let n = z.len();
        let mut cols = vec![[0.0; 6]; n];
        for c0 in (0..n).step_by(8) {
            let qd: Vec<Dual<8>> = (0..n)
                .map(|j| Dual::variable(z[j], if j >= c0 { j - c0 } else { usize::MAX }))
                .collect();
            let r = self.residual(&qd);
            for j in c0..n.min(c0 + 8) {
                for (k, v) in r.iter().enumerate() {
                    cols[j][k] = v.d[j - c0];
                }
            }
        }
        let mut jac = SparseMatrix::new(n);
        for k in 0..6 {
            jac.push_row((0..n).map(|j| (j, cols[j][k])));
        }
        jac
    }
    fn objective_hessian(&self, z: &[f64]) -> Option<Vec<(usize, usize, f64)>> {
        Some((0..z.len()).map(|i| (i, i, 2.0 * self.weight)).collect())
    }
}

/// Joint configuration reaching the spec's target pose, chosen close to the
/// start configuration. Returns the start itself if it already is on target,
/// and the solver's best effort when the target cannot be reached.
pub fn goal_configuration(spec: &OcpSpec) -> Result<Vec<f64>> {
    let pose = forward_kinematics(&spec.chain, &spec.q0)?;
    let err = (pose.position - spec.target_position)
        .norm()
        .max(orientation_error(&pose.rotation, &spec.target_rotation)?.norm());
    if err <= 1e-12 {
        return Ok(spec.q0.clone());
    }
    let problem = GoalProblem {
        spec,
        hint: spec.q0.clone(),
        lb: spec.bounds.q_min.clone(),
        ub: spec.bounds.q_max.clone(),
        weight: 1e-2,
    };
    let cfg = SolverConfig {
        tol_constraint: 1e-11,
        tol_stationarity: 1e-9,
        max_inner: 200,
        stall_limit: 6,
        ..SolverConfig::default()
    };
    let (q, report) = solve(&problem, &spec.q0, &cfg)?;
    if !report.converged() {
        log::warn!("goal configuration not reached ({}), violation {:.3e}", report.status.as_str(), report.violation);
    }
    Ok(q)
}

fn quintic(s: f64) -> (f64, f64) {
    let s2 = s * s;
    (s2 * s * (10.0 - 15.0 * s + 6.0 * s2), 30.0 * s2 * (1.0 - 2.0 * s + s2))
}

/// Initial guess for `nlp`: a straight joint-space path to the goal
/// configuration with quintic timing, pendulum angle interpolated between its
/// equilibria, and accelerations from second differences. Clamped to the bounds.
pub fn warm_start(nlp: &Nlp) -> Result<Vec<f64>> {
    let spec = nlp.spec();
    let q_goal = goal_configuration(spec)?;
    let (n, big_n, h) = (nlp.n_dof(), nlp.n_intervals(), nlp.step_size());
    let path: Vec<Vec<f64>> = (0..=big_n)
        .map(|k| {
            let s = quintic(k as f64 / big_n as f64).0;
            (0..n).map(|i| spec.q0[i] + s * (q_goal[i] - spec.q0[i])).collect()
        })
        .collect();
    let mut us = vec![vec![0.0; n]; big_n + 1];
    for k in 1..big_n {
        for i in 0..n {
            us[k][i] = (path[k + 1][i] - 2.0 * path[k][i] + path[k - 1][i]) / (h * h);
        }
    }
    let (th0, th1) = (nlp.theta_initial(), nlp.theta_terminal());
    let qd_off = nlp.qd_offset();
    let mut xs = Vec::with_capacity(big_n + 1);
    let (mut q, mut qd) = (spec.q0.clone(), vec![0.0; n]);
    for k in 0..=big_n {
        let mut x = vec![0.0; nlp.state_dim()];
        x[..n].copy_from_slice(&q);
        x[qd_off..qd_off + n].copy_from_slice(&qd);
        if nlp.kind() == OcpKind::Full {
            let (s, ds) = quintic(k as f64 / big_n as f64);
            x[n] = th0 + s * (th1 - th0);
            x[2 * n + 1] = ds / spec.tf * (th1 - th0);
        }
        xs.push(x);
        for i in 0..n {
            q[i] += h * qd[i] + 0.5 * h * h * us[k][i];
            qd[i] += h * us[k][i];
        }
    }
    let mut z = nlp.pack(&xs, &us)?;
    let (lb, ub) = nlp.bounds();
    project(&mut z, lb, ub);
    Ok(z)
}

/// Initial guess built from an arm-only solution: its joint motion is
/// resampled (and time-scaled if the travel times differ) onto `nlp`'s grid
/// and the pendulum response is simulated on the same RK4 grid.
pub fn warm_start_from(nlp: &Nlp, arm: &OcpSolution) -> Result<Vec<f64>> {
    let n = nlp.n_dof();
    Error::check_len("arm solution joints", n, arm.n_dof)?;
    let traj = arm.to_joint_trajectory()?;
    let scale = arm.tf() / nlp.spec().tf;
    let big_n = nlp.n_intervals();
    let mut us = Vec::with_capacity(big_n + 1);
    for k in 0..=big_n {
        if k == big_n {
            us.push(vec![0.0; n]);
            continue;
        }
        let t = k as f64 / big_n as f64 * arm.tf();
        us.push(traj.acceleration_at(t).iter().map(|a| a * scale * scale).collect());
    }
    let mut xs = vec![nlp.initial_state().to_vec()];
    for k in 0..big_n {
        let next = nlp.step(xs.last().unwrap(), &us[k]);
        xs.push(next);
    }
    if nlp.kind() == OcpKind::Full {
        // the simulated swing is kept but bent towards rest at the goal
        let (th1, last) = (nlp.theta_terminal(), xs[big_n].clone());
        let tf = nlp.spec().tf;
        for (k, x) in xs.iter_mut().enumerate() {
            let (s, ds) = quintic(k as f64 / big_n as f64);
            x[n] += s * (th1 - last[n]);
            x[2 * n + 1] += ds / tf * (th1 - last[n]) - s * last[2 * n + 1];
        }
    }
    let mut z = nlp.pack(&xs, &us)?;
    let (lb, ub) = nlp.bounds();
    project(&mut z, lb, ub);
    Ok(z)
}

/// Builds, warm-starts and solves one problem. With `init`, the guess comes
/// from that (arm-only) solution instead of the straight-line path.
pub fn solve_ocp(spec: &OcpSpec, kind: OcpKind, cfg: &SolverConfig, init: Option<&OcpSolution>) -> Result<OcpSolution> {
    let nlp = build_nlp(spec, kind)?;
    let z0 = match init {
        Some(sol) => warm_start_from(&nlp, sol)?,
        None => warm_start(&nlp)?,
    };
    let (z, report) = solve(&nlp, &z0, cfg)?;
    Ok(OcpSolution::from_decision(&nlp, &z, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        lb: Vec<f64>,
        ub: Vec<f64>,
        eq: bool,
    }

    impl NlpProblem for Quadratic {
        fn n_vars(&self) -> usize {
            self.lb.len()
        }
        fn n_eq(&self) -> usize {
            usize::from(self.eq)
        }
        fn bounds(&self) -> (&[f64], &[f64]) {
            (&self.lb, &self.ub)
        }
        fn objective(&self, z: &[f64]) -> f64 {
            if self.eq {
                z.iter().map(|v| v * v).sum()
            } else {
                (z[0] - 3.0).powi(2)
            }
        }
        fn objective_gradient(&self, z: &[f64], g: &mut [f64]) -> f64 {
            if self.eq {
                for i in 0..z.len() {
                    g[i] = 2.0 * z[i];
                }
            } else {
                g[0] = 2.0 * (z[0] - 3.0);
            }
            self.objective(z)
        }
        fn constraints(&self, z: &[f64], out: &mut [f64]) {
            if self.eq {
                out[0] = z[0] + z[1] - 1.0;
            }
        }
        fn jacobian(&self, _z: &[f64]) -> SparseMatrix {
            let mut j = SparseMatrix::new(self.n_vars());
            if self.eq {
                j.push_row([(0, 1.0), (1, 1.0)]);
            }
            j
        }
    }

    #[test]
    fn bounded_scalar_quadratic() {
        let p = Quadratic { lb: vec![0.0], ub: vec![10.0], eq: false };
        let (z, r) = solve(&p, &[0.0], &SolverConfig::default()).unwrap();
        assert!(r.converged());
        assert!((z[0] - 3.0).abs() < 1e-8);
        // optimum outside the box lands on the bound
        let p = Quadratic { lb: vec![0.0], ub: vec![2.0], eq: false };
        let (z, r) = solve(&p, &[0.0], &SolverConfig::default()).unwrap();
        assert!(r.converged());
        assert_eq!(z[0], 2.0);
    }

    #[test]
    fn equality_constrained_quadratic() {
        let inf = f64::INFINITY;
        let p = Quadratic { lb: vec![-inf; 2], ub: vec![inf; 2], eq: true };
        let (z, r) = solve(&p, &[0.0, 0.0], &SolverConfig::default()).unwrap();
        assert!(r.converged(), "{r:?}");
        assert!((z[0] - 0.5).abs() < 1e-6 && (z[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn infeasible_problem_stalls() {
        // z0 + z1 = 1 with both variables pinned to zero
        let p = Quadratic { lb: vec![0.0; 2], ub: vec![0.0; 2], eq: true };
        let (_, r) = solve(&p, &[0.0, 0.0], &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::InfeasibleStall);
    }

    #[test]
    fn config_validation() {
        let cfg = SolverConfig { tol_constraint: 2.0, ..SolverConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = SolverConfig { mu_growth: 1.0, ..SolverConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn quintic_profile() {
        assert_eq!(quintic(0.0), (0.0, 0.0));
        let (s, ds) = quintic(1.0);
        assert!((s - 1.0).abs() < 1e-15 && ds.abs() < 1e-15);
        assert!((quintic(0.5).0 - 0.5).abs() < 1e-15);
    }
}
