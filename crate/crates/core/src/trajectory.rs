//! Joint trajectories with piecewise-constant accelerations.
//!
//! Sample `j` holds the joint position and velocity at `t[j]` and the
//! acceleration applied on `[t[j], t[j+1])`. The last acceleration sample is
//! the one applied after the final knot (zero for rest-to-rest motions).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct JointTrajectory {
    t: Vec<f64>,
    q: Vec<Vec<f64>>,
    qd: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
}

impl JointTrajectory {
    /// Integrates `u` exactly (double integrator) from `(q0, qd0)`.
    pub fn from_accelerations(t: Vec<f64>, q0: Vec<f64>, qd0: Vec<f64>, u: Vec<Vec<f64>>) -> Result<Self> {
        let n = q0.len();
        Error::check_len("initial velocity", n, qd0.len())?;
        Error::check_len("acceleration samples", t.len(), u.len())?;
        check_times(&t)?;
        for uj in &u {
            Error::check_len("acceleration sample", n, uj.len())?;
        }
        let mut q = Vec::with_capacity(t.len());
        let mut qd = Vec::with_capacity(t.len());
        q.push(q0);
        qd.push(qd0);
        for j in 0..t.len() - 1 {
            let h = t[j + 1] - t[j];
            let (qj, qdj, uj) = (&q[j], &qd[j], &u[j]);
            let qn: Vec<f64> = (0..n).map(|i| qj[i] + h * qdj[i] + 0.5 * h * h * uj[i]).collect();
            let qdn: Vec<f64> = (0..n).map(|i| qdj[i] + h * uj[i]).collect();
            q.push(qn);
            qd.push(qdn);
        }
        Ok(JointTrajectory { t, q, qd, u })
    }

    /// Takes samples as given, e.g. read back from a file.
    pub fn from_samples(t: Vec<f64>, q: Vec<Vec<f64>>, qd: Vec<Vec<f64>>, u: Vec<Vec<f64>>) -> Result<Self> {
        check_times(&t)?;
        Error::check_len("position samples", t.len(), q.len())?;
        Error::check_len("velocity samples", t.len(), qd.len())?;
        Error::check_len("acceleration samples", t.len(), u.len())?;
        let n = q[0].len();
        if n == 0 {
            return Err(Error::invalid("trajectory has no joints"));
        }
        for j in 0..t.len() {
            Error::check_len("position sample", n, q[j].len())?;
            Error::check_len("velocity sample", n, qd[j].len())?;
            Error::check_len("acceleration sample", n, u[j].len())?;
        }
        Ok(JointTrajectory { t, q, qd, u })
    }

    /// Standing still at `q` for `duration` seconds on a grid of step `dt`.
    pub fn hold(q: Vec<f64>, duration: f64, dt: f64) -> Result<Self> {
        if !(duration > 0.0 && dt > 0.0) {
            return Err(Error::invalid("hold needs positive duration and step"));
        }
        let steps = (duration / dt).round().max(1.0) as usize;
        let h = duration / steps as f64;
        let n = q.len();
        let t = (0..=steps).map(|j| j as f64 * h).collect();
        Self::from_accelerations(t, q, vec![0.0; n], vec![vec![0.0; n]; steps + 1])
    }

    pub fn n_dof(&self) -> usize {
        self.q[0].len()
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn positions(&self) -> &[Vec<f64>] {
        &self.q
    }

    pub fn velocities(&self) -> &[Vec<f64>] {
        &self.qd
    }

    pub fn accelerations(&self) -> &[Vec<f64>] {
        &self.u
    }

    pub fn start_time(&self) -> f64 {
        self.t[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.t.last().unwrap()
    }

    pub fn duration(&self) -> f64 {
        self.end_time() - self.start_time()
    }

    pub fn final_position(&self) -> &[f64] {
        self.q.last().unwrap()
    }

    /// Sampling step if the knots are uniformly spaced to `tol`.
    pub fn uniform_step(&self, tol: f64) -> Option<f64> {
        let dt = self.duration() / (self.t.len() - 1) as f64;
        self.t
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= tol)
            .then_some(dt)
    }

    /// Index of the segment containing `t` (clamped to the valid range).
    pub fn segment_at(&self, t: f64) -> usize {
        match self.t.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(j) => j,
            Err(0) => 0,
            Err(j) => j - 1,
        }
    }

    /// Acceleration applied at time `t`; zero before the start.
    pub fn acceleration_at(&self, t: f64) -> &[f64] {
        &self.u[self.segment_at(t)]
    }

    /// Exact state `(q, qd)` at time `t` within `[start, end]`.
    pub fn state_at(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let j = self.segment_at(t);
        let h = t - self.t[j];
        let n = self.n_dof();
        let (q, qd, u) = (&self.q[j], &self.qd[j], &self.u[j]);
        (
            (0..n).map(|i| q[i] + h * qd[i] + 0.5 * h * h * u[i]).collect(),
            (0..n).map(|i| qd[i] + h * u[i]).collect(),
        )
    }

    /// Largest violation of the given per-joint limits, as a ratio (> 1 means violated).
    pub fn limit_usage(&self, limits: &[crate::kinematics::JointLimits]) -> LimitUsage {
        let mut usage = LimitUsage::default();
        for j in 0..self.t.len() {
            for (i, l) in limits.iter().enumerate() {
                let q = self.q[j][i];
                let below = (l.q_min - q).max(0.0);
                let above = (q - l.q_max).max(0.0);
                usage.position_excess = usage.position_excess.max(below.max(above));
                usage.velocity = usage.velocity.max(self.qd[j][i].abs() / l.qd_max);
                usage.acceleration = usage.acceleration.max(self.u[j][i].abs() / l.qdd_max);
                if j + 1 < self.t.len() {
                    let h = self.t[j + 1] - self.t[j];
                    let jerk = (self.u[j + 1][i] - self.u[j][i]).abs() / h;
                    usage.jerk = usage.jerk.max(jerk / l.jerk_max);
                }
            }
        }
        usage
    }

    /// Columns `t, q1.., qd1.., u1..`.
    pub fn to_csv(&self) -> String {
        let n = self.n_dof();
        let mut s = String::from("t");
        for prefix in ["q", "qd", "u"] {
            for i in 1..=n {
                let _ = write!(s, ",{prefix}{i}");
            }
        }
        s.push('\n');
        for k in 0..self.t.len() {
            let _ = write!(s, "{}", self.t[k]);
            for v in self.q[k].iter().chain(&self.qd[k]).chain(&self.u[k]) {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    /// Reads the `t, q*, qd*, u*` columns of a CSV file by header name; other
    /// columns are ignored.
    pub fn from_csv_str(text: &str, origin: &Path) -> Result<Self> {
        let parse_err = |msg: String| Error::Parse {
            path: origin.to_path_buf(),
            msg,
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| parse_err("empty file".into()))?
            .split(',')
            .map(str::trim)
            .collect();
        let col = |name: &str| header.iter().position(|h| *h == name);
        let t_col = col("t").ok_or_else(|| parse_err("missing column t".into()))?;
        let mut n = 0;
        while col(&format!("q{}", n + 1)).is_some() {
            n += 1;
        }
        if n == 0 {
            return Err(parse_err("missing column q1".into()));
        }
        let mut cols = Vec::with_capacity(3 * n);
        for prefix in ["q", "qd", "u"] {
            for i in 1..=n {
                cols.push(col(&format!("{prefix}{i}")).ok_or_else(|| parse_err(format!("missing column {prefix}{i}")))?);
            }
        }
        let (mut t, mut q, mut qd, mut u) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (row, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            let get = |c: usize| -> Result<f64> {
                cells
                    .get(c)
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| parse_err(format!("row {}: bad value in column {}", row + 2, header[c])))
            };
            t.push(get(t_col)?);
            let vals = cols.iter().map(|c| get(*c)).collect::<Result<Vec<_>>>()?;
            q.push(vals[..n].to_vec());
            qd.push(vals[n..2 * n].to_vec());
            u.push(vals[2 * n..].to_vec());
        }
        Self::from_samples(t, q, qd, u)
    }
}

/// Peak use of the joint limits along a trajectory.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LimitUsage {
    /// Largest excursion outside the position range (rad).
    pub position_excess: f64,
    pub velocity: f64,
    pub acceleration: f64,
    pub jerk: f64,
}

impl LimitUsage {
    pub fn within(&self, slack: f64) -> bool {
        self.position_excess <= slack
            && self.velocity <= 1.0 + slack
            && self.acceleration <= 1.0 + slack
            && self.jerk <= 1.0 + slack
    }
}

fn check_times(t: &[f64]) -> Result<()> {
    if t.len() < 2 {
        return Err(Error::invalid("a trajectory needs at least two knots"));
    }
    if !t.iter().all(|x| x.is_finite()) || t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("trajectory times must be finite and strictly increasing"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_double_integration() {
        let t = vec![0.0, 0.5, 1.0, 1.5];
        let u = vec![vec![2.0], vec![0.0], vec![-2.0], vec![0.0]];
        let traj = JointTrajectory::from_accelerations(t, vec![1.0], vec![0.0], u).unwrap();
        assert_eq!(traj.final_position(), &[2.0]);
        assert_eq!(traj.velocities().last().unwrap(), &[0.0]);
        let (q, qd) = traj.state_at(0.25);
        assert!((q[0] - 1.0625).abs() < 1e-15 && (qd[0] - 0.5).abs() < 1e-15);
        assert_eq!(traj.uniform_step(1e-12), Some(0.5));
    }

    #[test]
    fn rejects_bad_times() {
        let r = JointTrajectory::from_accelerations(vec![0.0, 0.0], vec![0.0], vec![0.0], vec![vec![0.0]; 2]);
        assert!(r.is_err());
    }
}
