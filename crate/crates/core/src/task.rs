//! Task files: a chain, a pendulum parameter set, a start configuration and a
//! goal, plus optional weight, bound, solver, plant and estimation settings.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::beam_model::{Orientation, ParamSet, PendulumParams};
use crate::error::{Error, Result};
use crate::estimation::Aggregation;
use crate::input_shaping::ShapingSpace;
use crate::kinematics::{forward_kinematics, rot_z, ChainModel};
use crate::nlp_solver::SolverConfig;
use crate::simulator::{CompareSetup, Plant, RolloutOptions, RowSelection};
use crate::transcription::{CostNorm, OcpSpec};

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TaskFile {
    pub name: String,
    /// Chain file, relative to the task file.
    pub chain: PathBuf,
    /// Parameter file, relative to the task file.
    pub params: PathBuf,
    /// Named configuration of the chain.
    #[serde(default)]
    pub start: Option<String>,
    #[serde(default)]
    pub start_q: Option<Vec<f64>>,
    /// Tool displacement in the base frame (m).
    #[serde(default)]
    pub displacement: [f64; 3],
    /// `O1`, `O2`, `O3`; the start orientation when absent.
    #[serde(default)]
    pub target_orientation: Option<String>,
    /// Extra rotation of the target orientation about the base Z axis (deg).
    #[serde(default)]
    pub rotate_z_deg: f64,
    #[serde(default)]
    pub travel_times: Option<Vec<f64>>,
    #[serde(default = "yes")]
    pub align_tf3_with_zv: bool,
    #[serde(default)]
    pub n_intervals: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub gravity: Option<[f64; 3]>,
    #[serde(default)]
    pub shaping_space: Option<String>,
    #[serde(default)]
    pub weights: WeightsEntry,
    #[serde(default)]
    pub bounds: BoundsEntry,
    #[serde(default)]
    pub solver: SolverEntry,
    #[serde(default)]
    pub plant: PlantEntry,
    #[serde(default)]
    pub estimation: EstimationEntry,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsEntry {
    pub theta: Option<f64>,
    pub theta_dot: Option<f64>,
    pub q: Option<f64>,
    pub qd: Option<f64>,
    pub control: Option<f64>,
    pub jerk: Option<f64>,
    pub norm: Option<String>,
}

/// Fractions of the chain limits.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsEntry {
    pub velocity_scale: Option<f64>,
    pub acceleration_scale: Option<f64>,
    pub jerk_scale: Option<f64>,
    pub theta_max: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolverEntry {
    pub tol_constraint: Option<f64>,
    pub tol_stationarity: Option<f64>,
    pub max_outer: Option<usize>,
    pub max_inner: Option<usize>,
    pub memory: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PlantEntry {
    /// `nonlinear` or `linear`.
    pub model: Option<String>,
    /// Multiplies the model natural frequency.
    pub omega_scale: Option<f64>,
    pub zeta_scale: Option<f64>,
    pub dt: Option<f64>,
    pub t_r: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationEntry {
    pub displacement: Option<[f64; 3]>,
    pub tf: Option<f64>,
    pub repetitions: Option<usize>,
    pub noise_db: Option<f64>,
    pub duration: Option<f64>,
    pub smoothing: Option<usize>,
    pub aggregation: Option<String>,
}

/// Estimation settings with defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationSettings {
    pub displacement: [f64; 3],
    pub tf: f64,
    pub repetitions: usize,
    pub noise_db: Option<f64>,
    pub duration: f64,
    pub smoothing: usize,
    pub aggregation: String,
}

/// A task with every reference resolved.
#[derive(Debug, Clone)]
pub struct Task {
    pub file: TaskFile,
    pub path: PathBuf,
    pub chain_path: PathBuf,
    pub params_path: PathBuf,
    pub params_label: String,
    /// Template problem at the first travel time (or 1 s).
    pub spec: OcpSpec,
    pub plant: PendulumParams,
    pub rollout: RolloutOptions,
    pub solver: SolverConfig,
    pub shaping_space: ShapingSpace,
    pub estimation: EstimationSettings,
}

impl Task {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, path)
    }

    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        let file: TaskFile = toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let chain_path = dir.join(&file.chain);
        let params_path = dir.join(&file.params);
        let chain = ChainModel::load(&chain_path)?;
        let set = ParamSet::load(&params_path)?;
        resolve(file, path.to_path_buf(), chain_path, params_path, chain, set)
    }

    pub fn travel_times(&self) -> Result<[f64; 3]> {
        match &self.file.travel_times {
            Some(t) if t.len() == 3 => Ok([t[0], t[1], t[2]]),
            Some(t) => Err(Error::invalid(format!("task needs exactly three travel times, got {}", t.len()))),
            None => Err(Error::invalid("task has no travel times")),
        }
    }

    pub fn compare_setup(&self, rows: RowSelection) -> Result<CompareSetup> {
        Ok(CompareSetup {
            name: self.file.name.clone(),
            spec: self.spec.clone(),
            plant: self.plant.clone(),
            travel_times: self.travel_times()?,
            align_tf3_with_zv: self.file.align_tf3_with_zv,
            rollout: self.rollout.clone(),
            solver: self.solver.clone(),
            rows,
            shaping_space: self.shaping_space,
            workers: 1,
        })
    }

    pub fn aggregation(&self) -> Result<Aggregation> {
        Aggregation::parse(&self.estimation.aggregation)
    }
}

fn positive(what: &str, v: Option<f64>) -> Result<Option<f64>> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(Error::invalid(format!("{what} must be positive, got {x}"))),
        other => Ok(other),
    }
}

fn resolve(
    file: TaskFile,
    path: PathBuf,
    chain_path: PathBuf,
    params_path: PathBuf,
    chain: ChainModel,
    set: ParamSet,
) -> Result<Task> {
    let n = chain.n_dof();
    let q0 = match (&file.start, &file.start_q) {
        (Some(name), None) => chain.configuration(name)?.to_vec(),
        (None, Some(q)) => {
            Error::check_len("start_q", n, q.len())?;
            q.clone()
        }
        _ => return Err(Error::invalid("give exactly one of start and start_q")),
    };
    let pose = forward_kinematics(&chain, &q0)?;
    let target_position = pose.position + Vector3::from(file.displacement);
    let base_rotation: Matrix3<f64> = match &file.target_orientation {
        None => pose.rotation,
        Some(s) if s == "start" => pose.rotation,
        Some(s) => Orientation::parse(s)?.rotation(),
    };
    let target_rotation = rot_z(file.rotate_z_deg.to_radians()) * base_rotation;

    let travel = file.travel_times.clone();
    if let Some(t) = &travel {
        if t.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::invalid("travel times must be positive"));
        }
    }
    let tf = travel.as_ref().and_then(|t| t.first().copied()).unwrap_or(1.0);
    let mut spec = OcpSpec::new(chain, Some(set.params.clone()), q0, target_position, target_rotation, tf);
    if let Some(g) = file.gravity {
        spec.gravity = Vector3::from(g);
    }
    if let Some(k) = file.n_intervals {
        spec.n_intervals = k;
    }

    let w = &file.weights;
    let sw = &mut spec.weights;
    for (i, v) in sw.state.iter_mut().enumerate() {
        let pick = if i < n {
            w.q
        } else if i == n {
            w.theta
        } else if i < 2 * n + 1 {
            w.qd
        } else {
            w.theta_dot
        };
        if let Some(x) = pick {
            *v = x;
        }
    }
    if let Some(c) = w.control {
        sw.control = vec![c; n];
    }
    if let Some(j) = w.jerk {
        sw.jerk = j;
    }
    if let Some(norm) = &w.norm {
        sw.norm = CostNorm::parse(norm)?;
    }
    if sw.state.iter().chain(&sw.control).chain([&sw.jerk]).any(|x| !(*x >= 0.0 && x.is_finite())) {
        return Err(Error::invalid("weights must be nonnegative"));
    }

    let b = &file.bounds;
    if let Some(s) = positive("velocity_scale", b.velocity_scale)? {
        spec.bounds.qd_max.iter_mut().for_each(|v| *v *= s);
    }
    if let Some(s) = positive("acceleration_scale", b.acceleration_scale)? {
        spec.bounds.u_max.iter_mut().for_each(|v| *v *= s);
    }
    if let Some(s) = positive("jerk_scale", b.jerk_scale)? {
        spec.bounds.jerk_max.iter_mut().for_each(|v| *v *= s);
    }
    if let Some(t) = positive("theta_max", b.theta_max)? {
        spec.bounds.theta_max = t;
    }

    let mut solver = SolverConfig::default();
    let s = &file.solver;
    if let Some(v) = s.tol_constraint {
        solver.tol_constraint = v;
    }
    if let Some(v) = s.tol_stationarity {
        solver.tol_stationarity = v;
    }
    if let Some(v) = s.max_outer {
        solver.max_outer = v;
    }
    if let Some(v) = s.max_inner {
        solver.max_inner = v;
    }
    if let Some(v) = s.memory {
        solver.memory = v;
    }
    solver.validate()?;

    let p = &file.plant;
    let plant = set.params.detuned(
        positive("omega_scale", p.omega_scale)?.unwrap_or(1.0),
        positive("zeta_scale", p.zeta_scale)?.unwrap_or(1.0),
    )?;
    let mut rollout = RolloutOptions {
        gravity: spec.gravity,
        ..RolloutOptions::default()
    };
    if let Some(m) = &p.model {
        rollout.plant = Plant::parse(m)?;
    }
    if let Some(dt) = positive("plant dt", p.dt)? {
        rollout.dt = dt;
    }
    if let Some(t) = positive("plant t_r", p.t_r)? {
        rollout.t_r = t;
    }
    let shaping_space = match &file.shaping_space {
        Some(s) => ShapingSpace::parse(s)?,
        None => ShapingSpace::Joint,
    };

    let e = &file.estimation;
    let estimation = EstimationSettings {
        displacement: e.displacement.unwrap_or([0.0, 0.0, 0.05]),
        tf: positive("estimation tf", e.tf)?.unwrap_or(0.3),
        repetitions: e.repetitions.unwrap_or(6),
        noise_db: e.noise_db,
        duration: positive("estimation duration", e.duration)?.unwrap_or(3.0),
        smoothing: e.smoothing.unwrap_or(21),
        aggregation: e.aggregation.clone().unwrap_or_else(|| "min".into()),
    };
    Aggregation::parse(&estimation.aggregation)?;
    if estimation.smoothing == 0 || estimation.smoothing % 2 == 0 {
        return Err(Error::invalid("estimation smoothing window must be odd"));
    }

    Ok(Task {
        file,
        path,
        chain_path,
        params_path,
        params_label: set.label,
        spec,
        plant,
        rollout,
        solver,
        shaping_space,
        estimation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/tasks")
    }

    #[test]
    fn bundled_tasks_resolve() {
        for name in ["t1", "t2", "t3", "zero"] {
            let task = Task::load(&data().join(format!("{name}.toml"))).unwrap();
            assert_eq!(task.spec.q0.len(), 7);
        }
    }

    #[test]
    fn exactly_one_start_form() {
        let base = r#"
name = "x"
chain = "../chains/single.toml"
params = "../params/pendulum_analytical.toml"
"#;
        let p = data().join("inline.toml");
        assert!(Task::from_toml_str(base, &p).is_err());
        let both = format!("{base}start = \"zero\"\nstart_q = [0.0]\n");
        assert!(Task::from_toml_str(&both, &p).is_err());
        let one = format!("{base}start_q = [0.1]\n");
        let t = Task::from_toml_str(&one, &p).unwrap();
        assert_eq!(t.spec.q0, vec![0.1]);
        assert!(t.travel_times().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"
name = "x"
chain = "../chains/single.toml"
params = "../params/pendulum_analytical.toml"
start = "zero"
colour = "red"
"#;
        assert!(Task::from_toml_str(text, &data().join("inline.toml")).is_err());
    }
}
