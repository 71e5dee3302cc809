//! Identification of natural frequency and damping ratio from free-decay
//! records: peak detection, averaged period and logarithmic decrement.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kinematics::{forward_kinematics, ChainModel};
use crate::nlp_solver::{solve_ocp, SolverConfig};
use crate::trajectory::JointTrajectory;
use crate::transcription::{OcpBounds, OcpKind, OcpSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    t: Vec<f64>,
    y: Vec<f64>,
}

impl TimeSeries {
    pub fn new(t: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Error::check_len("series samples", t.len(), y.len())?;
        if t.len() < 3 {
            return Err(Error::invalid("a time series needs at least three samples"));
        }
        if !t.iter().chain(&y).all(|v| v.is_finite()) {
            return Err(Error::invalid("time series contains non-finite values"));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("time stamps must be strictly increasing"));
        }
        Ok(TimeSeries { t, y })
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.y.len() as f64
    }

    pub fn mean_removed(&self) -> TimeSeries {
        let m = self.mean();
        TimeSeries {
            t: self.t.clone(),
            y: self.y.iter().map(|v| v - m).collect(),
        }
    }

    pub fn scaled(&self, k: f64) -> TimeSeries {
        TimeSeries {
            t: self.t.clone(),
            y: self.y.iter().map(|v| v * k).collect(),
        }
    }

    /// Samples with `t0 <= t <= t1`.
    pub fn window(&self, t0: f64, t1: f64) -> Result<TimeSeries> {
        let (t, y): (Vec<f64>, Vec<f64>) = self
            .t
            .iter()
            .zip(&self.y)
            .filter(|(t, _)| **t >= t0 && **t <= t1)
            .map(|(a, b)| (*a, *b))
            .unzip();
        TimeSeries::new(t, y)
    }

    /// Centered moving average over `window` samples (odd; 1 leaves the
    /// series unchanged). Edge samples without a full window are dropped, so
    /// the filter has zero phase and scales a damped sinusoid uniformly.
    pub fn smoothed(&self, window: usize) -> Result<TimeSeries> {
        if window <= 1 {
            return Ok(self.clone());
        }
        if window % 2 == 0 {
            return Err(Error::invalid("smoothing window must be odd"));
        }
        let half = window / 2;
        if self.len() < window + 3 {
            return Err(Error::invalid("series too short for the smoothing window"));
        }
        let mut t = Vec::with_capacity(self.len() - 2 * half);
        let mut y = Vec::with_capacity(self.len() - 2 * half);
        let mut acc: f64 = self.y[..window].iter().sum();
        for i in half..self.len() - half {
            if i > half {
                acc += self.y[i + half] - self.y[i - half - 1];
            }
            t.push(self.t[i]);
            y.push(acc / window as f64);
        }
        TimeSeries::new(t, y)
    }

    /// Two-column CSV `t, y`; a non-numeric first line is taken as header.
    pub fn from_csv_str(text: &str, origin: &Path) -> Result<Self> {
        let parse_err = |line: usize, msg: &str| Error::Parse {
            path: origin.to_path_buf(),
            msg: format!("line {line}: {msg}"),
        };
        let (mut t, mut y) = (Vec::new(), Vec::new());
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 2 {
                return Err(parse_err(i + 1, "expected two columns"));
            }
            match (cols[0].parse::<f64>(), cols[1].parse::<f64>()) {
                (Ok(a), Ok(b)) => {
                    t.push(a);
                    y.push(b);
                }
                _ if t.is_empty() && i == 0 => continue,
                _ => return Err(parse_err(i + 1, "non-numeric value")),
            }
        }
        TimeSeries::new(t, y)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_str(&text, path)
    }

    pub fn to_csv(&self, header: &str) -> String {
        let mut s = format!("{header}\n");
        for (t, y) in self.t.iter().zip(&self.y) {
            let _ = writeln!(s, "{t},{y}");
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub t: f64,
    pub amplitude: f64,
}

/// Local maxima whose prominence reaches `min_prominence` times the first
/// (largest) peak, refined by a parabola through three samples.
///
/// The first sample counts as a peak when the parabola through the first three
/// samples is concave with its vertex within half a sample of the start.
pub fn detect_peaks(series: &TimeSeries, min_prominence: f64) -> Result<Vec<Peak>> {
    if !(min_prominence > 0.0 && min_prominence < 1.0) {
        return Err(Error::invalid("peak prominence fraction must lie in (0, 1)"));
    }
    let (t, y) = (&series.t, &series.y);
    let n = y.len();
    let mut cands: Vec<usize> = Vec::new();
    if let Some(v) = vertex(t, y, 0) {
        if y[0] > y[1] && (v.0 - t[0]).abs() <= 0.5 * (t[1] - t[0]) {
            cands.push(0);
        }
    }
    for i in 1..n - 1 {
        if y[i] > y[i - 1] && y[i] >= y[i + 1] {
            cands.push(i);
        }
    }
    let top = cands.iter().map(|&i| y[i]).fold(f64::NEG_INFINITY, f64::max);
    if !(top > 0.0) {
        return Err(Error::Estimation("signal too damped or too short: no positive peak".into()));
    }
    let threshold = min_prominence * top;
    let mut peaks = Vec::new();
    for &i in &cands {
        if y[i] < threshold || prominence(y, i) < threshold {
            continue;
        }
        let p = if i == 0 || i == n - 1 {
            Peak { t: t[i], amplitude: y[i] }
        } else {
            let (tv, yv) = vertex(t, y, i - 1).unwrap_or((t[i], y[i]));
            Peak { t: tv, amplitude: yv }
        };
        peaks.push(p);
    }
    if peaks.len() < 2 {
        return Err(Error::Estimation(format!(
            "signal too damped or too short: {} peak(s) above threshold",
            peaks.len()
        )));
    }
    Ok(peaks)
}

/// Vertex of the parabola through samples `i, i+1, i+2` if it is concave.
fn vertex(t: &[f64], y: &[f64], i: usize) -> Option<(f64, f64)> {
    if i + 2 >= t.len() {
        return None;
    }
    let (t0, t1, t2) = (t[i], t[i + 1], t[i + 2]);
    let (y0, y1, y2) = (y[i], y[i + 1], y[i + 2]);
    let d01 = (y1 - y0) / (t1 - t0);
    let d12 = (y2 - y1) / (t2 - t1);
    let a = (d12 - d01) / (t2 - t0);
    if !(a < 0.0) {
        return None;
    }
    let b = d01 - a * (t0 + t1);
    let tv = -b / (2.0 * a);
    let yv = y0 + (tv - t0) * (d01 + a * (tv - t1));
    Some((tv, yv))
}

/// Height of `y[i]` above the higher of the two lowest points separating it
/// from higher samples (or the series ends).
fn prominence(y: &[f64], i: usize) -> f64 {
    let h = y[i];
    let mut left_min = None::<f64>;
    for j in (0..i).rev() {
        if y[j] > h {
            break;
        }
        left_min = Some(left_min.map_or(y[j], |m| m.min(y[j])));
    }
    let mut right_min = None::<f64>;
    for &v in &y[i + 1..] {
        if v > h {
            break;
        }
        right_min = Some(right_min.map_or(v, |m| m.min(v)));
    }
    // a side without samples (series start or end) does not limit the base
    match (left_min, right_min) {
        (Some(a), Some(b)) => h - a.max(b),
        (Some(a), None) | (None, Some(a)) => h - a,
        (None, None) => 0.0,
    }
}

/// Averaged damped period and logarithmic decrement relative to the first peak.
pub fn log_decrement(peaks: &[Peak]) -> Result<(f64, f64)> {
    if peaks.len() < 2 {
        return Err(Error::Estimation("at least two peaks are needed".into()));
    }
    if peaks.iter().any(|p| !(p.amplitude > 0.0)) {
        return Err(Error::Estimation("peak amplitudes must be positive".into()));
    }
    let n = (peaks.len() - 1) as f64;
    let (t0, a0) = (peaks[0].t, peaks[0].amplitude);
    let mut period = 0.0;
    let mut delta = 0.0;
    for (k, p) in peaks.iter().enumerate().skip(1) {
        period += (p.t - t0) / k as f64;
        delta += (a0 / p.amplitude).ln() / k as f64;
    }
    Ok((period / n, delta / n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifyOptions {
    pub min_prominence: f64,
    pub max_peaks: usize,
    pub remove_mean: bool,
    /// Odd moving-average length applied before peak search; 1 disables.
    pub smoothing: usize,
}

impl Default for IdentifyOptions {
    fn default() -> Self {
        IdentifyOptions {
            min_prominence: 0.05,
            max_peaks: 8,
            remove_mean: true,
            smoothing: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationResult {
    pub period: f64,
    pub log_decrement: f64,
    pub omega_n: f64,
    pub zeta: f64,
    pub n_peaks: usize,
    pub peaks: Vec<Peak>,
}

pub fn identify(series: &TimeSeries, opts: &IdentifyOptions) -> Result<EstimationResult> {
    if opts.max_peaks < 2 {
        return Err(Error::invalid("at least two peaks must be allowed"));
    }
    let base = if opts.remove_mean { series.mean_removed() } else { series.clone() };
    let work = base.smoothed(opts.smoothing)?;
    let mut peaks = detect_peaks(&work, opts.min_prominence)?;
    peaks.truncate(opts.max_peaks);
    let (period, delta) = log_decrement(&peaks)?;
    let r = (4.0 * PI * PI + delta * delta).sqrt();
    let zeta = delta / r;
    let omega_n = r / period;
    if !(omega_n > 0.0 && (0.0..1.0).contains(&zeta)) {
        return Err(Error::Estimation(format!(
            "implausible estimate: omega_n = {omega_n}, zeta = {zeta} (growing oscillation?)"
        )));
    }
    Ok(EstimationResult {
        period,
        log_decrement: delta,
        omega_n,
        zeta,
        n_peaks: peaks.len(),
        peaks,
    })
}

/// How repeated experiments are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    /// Lowest damping ratio (underestimating damping is the safe side),
    /// mean frequency.
    Min,
    Mean,
}

impl Aggregation {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(Aggregation::Min),
            "mean" => Ok(Aggregation::Mean),
            other => Err(Error::invalid(format!("unknown aggregation '{other}' (expected min or mean)"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Aggregation::Min => "min",
            Aggregation::Mean => "mean",
        }
    }
}

/// Combined `(omega_n, zeta)` over several results.
pub fn aggregate(results: &[EstimationResult], policy: Aggregation) -> Result<(f64, f64)> {
    if results.is_empty() {
        return Err(Error::Estimation("no successful repetition to aggregate".into()));
    }
    let n = results.len() as f64;
    let omega = results.iter().map(|r| r.omega_n).sum::<f64>() / n;
    let zeta = match policy {
        Aggregation::Min => results.iter().map(|r| r.zeta).fold(f64::INFINITY, f64::min),
        Aggregation::Mean => results.iter().map(|r| r.zeta).sum::<f64>() / n,
    };
    Ok((omega, zeta))
}

/// Fast step-like excitation: the arm-only optimal motion translating `{b}`
/// by `displacement` (orientation kept) in `tf` seconds.
pub fn design_excitation(
    chain: &ChainModel,
    q0: &[f64],
    displacement: Vector3<f64>,
    bounds: &OcpBounds,
    tf: f64,
    cfg: &SolverConfig,
) -> Result<JointTrajectory> {
    let pose = forward_kinematics(chain, q0)?;
    let mut spec = OcpSpec::new(
        chain.clone(),
        None,
        q0.to_vec(),
        pose.position + displacement,
        pose.rotation,
        tf,
    );
    spec.bounds = bounds.clone();
    let sol = solve_ocp(&spec, OcpKind::ArmOnly, cfg, None)?;
    if !sol.report.converged() {
        return Err(Error::Solver(format!(
            "excitation design ended with status {} (violation {:.3e})",
            sol.report.status.as_str(),
            sol.report.violation
        )));
    }
    sol.to_joint_trajectory()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sampled(f: impl Fn(f64) -> f64, t_end: f64) -> TimeSeries {
        let n = (t_end * 1000.0).round() as usize;
        let t: Vec<f64> = (0..=n).map(|i| i as f64 * 1e-3).collect();
        let y = t.iter().map(|&t| f(t)).collect();
        TimeSeries::new(t, y).unwrap()
    }

    #[test]
    fn cosine_peaks_at_whole_seconds() {
        let s = sampled(|t| (2.0 * PI * t).cos(), 3.5);
        let peaks = detect_peaks(&s, 0.05).unwrap();
        assert_eq!(peaks.len(), 4);
        for (k, p) in peaks.iter().enumerate() {
            assert!((p.t - k as f64).abs() < 1e-3, "{p:?}");
        }
    }

    #[test]
    fn damped_cosine_spacing() {
        let s = sampled(|t| (-0.2 * t).exp() * (10.0 * t).cos(), 4.0);
        let peaks = detect_peaks(&s, 0.05).unwrap();
        assert!(peaks.len() >= 5);
        for w in peaks.windows(2) {
            assert!((w[1].t - w[0].t - 2.0 * PI / 10.0).abs() < 1e-3);
        }
    }

    #[test]
    fn constant_signal_has_no_peaks() {
        let s = sampled(|_| 1.0, 1.0);
        assert!(detect_peaks(&s.mean_removed(), 0.05).is_err());
        assert!(detect_peaks(&s, 0.05).is_err());
    }

    #[test]
    fn geometric_decay_decrement() {
        let peaks = [
            Peak { t: 0.0, amplitude: 1.0 },
            Peak { t: 1.0, amplitude: (-0.5f64).exp() },
            Peak { t: 2.0, amplitude: (-1.0f64).exp() },
        ];
        let (t, d) = log_decrement(&peaks).unwrap();
        assert!((t - 1.0).abs() < 1e-15 && (d - 0.5).abs() < 1e-15);
        let flat = [Peak { t: 0.0, amplitude: 2.0 }, Peak { t: 0.5, amplitude: 2.0 }];
        assert_eq!(log_decrement(&flat).unwrap(), (0.5, 0.0));
        let bad = [Peak { t: 0.0, amplitude: 1.0 }, Peak { t: 0.5, amplitude: -1.0 }];
        assert!(log_decrement(&bad).is_err());
    }

    #[test]
    fn undamped_signal_gives_zero_zeta() {
        let s = sampled(|t| (2.0 * PI * 2.0 * t).cos(), 3.0);
        let r = identify(&s, &IdentifyOptions::default()).unwrap();
        assert!(r.zeta.abs() < 1e-4);
        assert!((r.omega_n - 2.0 * PI / r.period).abs() < 1e-9);
    }

    #[test]
    fn smoothing_keeps_decrement() {
        let (wn, z) = (18.57_f64, 0.007_f64);
        let wd = wn * (1.0 - z * z).sqrt();
        let s = sampled(|t| (-z * wn * t).exp() * (wd * t).cos(), 3.0);
        let raw = identify(&s, &IdentifyOptions::default()).unwrap();
        let opts = IdentifyOptions { smoothing: 21, ..IdentifyOptions::default() };
        let smooth = identify(&s, &opts).unwrap();
        assert!((raw.omega_n / wn - 1.0).abs() < 1e-3);
        assert!((smooth.omega_n / wn - 1.0).abs() < 1e-3);
        assert!((smooth.zeta / z - 1.0).abs() < 0.02);
        assert!(TimeSeries::new(vec![0.0, 1.0, 2.0], vec![0.0; 3]).unwrap().smoothed(4).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = sampled(|t| t * t, 0.01);
        let text = s.to_csv("t,tau");
        let back = TimeSeries::from_csv_str(&text, Path::new("mem")).unwrap();
        assert_eq!(back, s);
        assert!(TimeSeries::from_csv_str("t,y\n0,1\n1,x\n", Path::new("mem")).is_err());
    }

    #[test]
    fn aggregation_policies() {
        let mk = |w, z| EstimationResult {
            period: 1.0,
            log_decrement: 0.0,
            omega_n: w,
            zeta: z,
            n_peaks: 2,
            peaks: vec![],
        };
        let rs = [mk(18.0, 0.01), mk(19.0, 0.005)];
        assert_eq!(aggregate(&rs, Aggregation::Min).unwrap(), (18.5, 0.005));
        assert_eq!(aggregate(&rs, Aggregation::Mean).unwrap(), (18.5, 0.0075));
        assert!(aggregate(&[], Aggregation::Min).is_err());
    }
}
