//! Command-line front end: argument definitions, the four subcommands and the
//! run manifest written next to every output.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimation::{aggregate, design_excitation, identify, EstimationResult, IdentifyOptions, TimeSeries};
use crate::input_shaping::{shape_trajectory, zv_shaper, ImpulseTiming, Shaper, ShapingSpace};
use crate::kinematics::ChainModel;
use crate::nlp_solver::{solve_ocp, SolverConfig};
use crate::simulator::{compare_controllers, linearized_mode_at, parallel_map, rollout, Plant, RowSelection};
use crate::task::Task;
use crate::trajectory::JointTrajectory;
use crate::transcription::{OcpKind, OcpSpec};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_ESTIMATION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "flexbeam", version, about = "Vibration-free point-to-point motions for an arm carrying a flexible beam")]
pub struct Cli {
    /// More log output (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Identify pendulum frequency and damping from simulated excitation runs.
    Estimate(EstimateArgs),
    /// Solve one OCP or arm-only OCP and write the trajectory.
    Solve(SolveArgs),
    /// Compare aOCP, OCP at three travel times and ZV input shaping.
    Compare(CompareArgs),
    /// Convolve a trajectory CSV with an input shaper.
    Shape(ShapeArgs),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Task file.
    pub task: PathBuf,
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Signal-to-noise ratio of the injected white noise (dB).
    #[arg(long)]
    pub noise_db: Option<f64>,
    /// Disable noise even if the task asks for it.
    #[arg(long, conflicts_with = "noise_db")]
    pub no_noise: bool,
    /// Overrides the task seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// `nonlinear` or `linear`.
    #[arg(long)]
    pub plant: Option<String>,
    /// Odd moving-average length applied before peak detection.
    #[arg(long)]
    pub smoothing: Option<usize>,
    /// `min` (smallest damping, mean frequency) or `mean`.
    #[arg(long)]
    pub aggregation: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub task: PathBuf,
    /// `ocp` or `aocp`.
    #[arg(long, default_value = "ocp")]
    pub kind: String,
    /// Travel time; the task's first travel time by default.
    #[arg(long)]
    pub tf: Option<f64>,
    /// Also write the outer-iteration trace.
    #[arg(long)]
    pub trace: bool,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub task: PathBuf,
    /// Rows to emit: any of `aocp`, `ocp`, `zv`.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
    #[arg(long)]
    pub plant: Option<String>,
    /// Keep the task's third travel time instead of the ZV-shaped duration.
    #[arg(long)]
    pub no_align: bool,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ShapeArgs {
    /// Trajectory CSV with columns t, q*, qd*, u*.
    pub trajectory: PathBuf,
    /// `zv` or `none`.
    #[arg(long, default_value = "zv")]
    pub shaper: String,
    #[arg(long)]
    pub wn: Option<f64>,
    #[arg(long)]
    pub zeta: Option<f64>,
    /// `joint` or `operational`.
    #[arg(long, default_value = "joint")]
    pub space: String,
    /// Chain file, needed for operational-space shaping.
    #[arg(long)]
    pub chain: Option<PathBuf>,
    /// `exact` or `rounded`.
    #[arg(long, default_value = "exact")]
    pub timing: String,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NoConvergence(_) | Error::Solver(_) | Error::SolverDiverged { .. } | Error::Diverged { .. } => {
                EXIT_SOLVER
            }
            Error::Estimation(_) => EXIT_ESTIMATION,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

#[derive(Debug, Clone, Serialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema: String,
    pub tool_version: String,
    pub command: String,
    pub inputs: Vec<FileHash>,
    pub config: Value,
    pub outputs: Vec<FileHash>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn hash_file(path: &Path) -> Result<FileHash> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(FileHash {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
    })
}

/// Collects output files, each written through a temporary file and a rename.
struct OutputDir {
    dir: PathBuf,
    written: Vec<FileHash>,
}

impl OutputDir {
    fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), contents)?;
        self.written.push(FileHash {
            path: name.to_string(),
            sha256: sha256_hex(contents),
        });
        Ok(())
    }

    fn finish(mut self, command: &str, inputs: Vec<FileHash>, config: Value) -> Result<()> {
        let manifest = RunManifest {
            schema: "flexbeam.manifest/1".into(),
            tool_version: TOOL_VERSION.into(),
            command: command.into(),
            inputs,
            config,
            outputs: std::mem::take(&mut self.written),
        };
        write_atomic(&self.dir.join("manifest.json"), to_json(&manifest).as_bytes())
    }
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    std::fs::write(&tmp, contents).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn task_inputs(task: &Task) -> Result<Vec<FileHash>> {
    Ok(vec![hash_file(&task.path)?, hash_file(&task.chain_path)?, hash_file(&task.params_path)?])
}

fn spec_echo(spec: &OcpSpec) -> Value {
    json!({
        "q0": spec.q0,
        "target_position": spec.target_position.as_slice(),
        "target_rotation": (0..3).map(|i| [spec.target_rotation[(i, 0)], spec.target_rotation[(i, 1)], spec.target_rotation[(i, 2)]]).collect::<Vec<_>>(),
        "gravity": spec.gravity.as_slice(),
        "n_intervals": spec.n_intervals,
        "weights": {
            "state": spec.weights.state,
            "control": spec.weights.control,
            "jerk": spec.weights.jerk,
            "norm": spec.weights.norm.as_str(),
        },
        "bounds": {
            "q_min": spec.bounds.q_min,
            "q_max": spec.bounds.q_max,
            "qd_max": spec.bounds.qd_max,
            "u_max": spec.bounds.u_max,
            "jerk_max": spec.bounds.jerk_max,
            "theta_max": spec.bounds.theta_max,
        },
    })
}

fn solver_echo(cfg: &SolverConfig) -> Value {
    json!({
        "tol_constraint": cfg.tol_constraint,
        "tol_stationarity": cfg.tol_stationarity,
        "max_outer": cfg.max_outer,
        "max_inner": cfg.max_inner,
        "memory": cfg.memory,
    })
}

fn task_echo(task: &Task) -> Value {
    let p = &task.plant;
    json!({
        "task": task.file,
        "params_label": task.params_label,
        "spec": spec_echo(&task.spec),
        "solver": solver_echo(&task.solver),
        "plant": {
            "model": task.rollout.plant.as_str(),
            "omega_n": p.omega_n(),
            "zeta": p.zeta(),
            "length": p.length(),
            "mass": p.mass(),
            "dt": task.rollout.dt,
            "t_r": task.rollout.t_r,
        },
    })
}

/// Parses arguments, sets up logging and runs the command; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();
    match run(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

pub fn run(cmd: &Command) -> CmdResult {
    match cmd {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Shape(a) => cmd_shape(a),
    }
}

fn solve_report_json(sol: &crate::transcription::OcpSolution) -> Value {
    let r = &sol.report;
    json!({
        "schema": "flexbeam.solve/1",
        "kind": sol.kind.as_str(),
        "tf": sol.tf(),
        "status": r.status.as_str(),
        "objective": sol.objective,
        "violation": sol.violation,
        "stationarity": r.stationarity,
        "outer_iterations": r.outer_iterations,
        "inner_iterations": r.inner_iterations,
        "penalty": r.penalty,
        "theta_initial": sol.theta_initial,
        "theta_terminal": sol.theta_terminal,
    })
}

pub fn cmd_solve(a: &SolveArgs) -> CmdResult {
    let task = Task::load(&a.task)?;
    let kind = OcpKind::parse(&a.kind)?;
    let tf = match a.tf {
        Some(t) => t,
        None => task
            .file
            .travel_times
            .as_ref()
            .and_then(|t| t.first().copied())
            .ok_or_else(|| Failure::usage("give --tf or travel times in the task"))?,
    };
    let mut spec = task.spec.with_tf(tf);
    if kind == OcpKind::ArmOnly {
        spec.params = None;
    }
    let mut cfg = task.solver.clone();
    cfg.trace = a.trace;
    let sol = solve_ocp(&spec, kind, &cfg, None)?;
    let mut out = OutputDir::create(&a.out)?;
    out.write("solution.csv", sol.to_csv().as_bytes())?;
    out.write("solve_report.json", to_json(&solve_report_json(&sol)).as_bytes())?;
    if a.trace {
        out.write("trace.csv", sol.report.trace_csv().as_bytes())?;
    }
    let mut config = task_echo(&task);
    config["kind"] = json!(kind.as_str());
    config["tf"] = json!(tf);
    out.finish("solve", task_inputs(&task)?, config)?;
    println!(
        "{} t_f = {tf} s: {} (objective {:.6e}, violation {:.2e}, {} outer / {} inner iterations)",
        kind.as_str(),
        sol.report.status.as_str(),
        sol.objective,
        sol.violation,
        sol.report.outer_iterations,
        sol.report.inner_iterations
    );
    if sol.report.converged() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_SOLVER,
            message: format!("solver finished with status {}", sol.report.status.as_str()),
        })
    }
}

fn row_selection(only: &[String]) -> std::result::Result<RowSelection, Failure> {
    if only.is_empty() {
        return Ok(RowSelection::default());
    }
    let mut rows = RowSelection {
        aocp: false,
        ocp: false,
        zv: false,
    };
    for o in only {
        match o.as_str() {
            "aocp" => rows.aocp = true,
            "ocp" => rows.ocp = true,
            "zv" => rows.zv = true,
            other => return Err(Failure::usage(format!("unknown row '{other}' (expected aocp, ocp or zv)"))),
        }
    }
    Ok(rows)
}

pub fn cmd_compare(a: &CompareArgs) -> CmdResult {
    let mut task = Task::load(&a.task)?;
    let rows = row_selection(&a.only)?;
    if let Some(p) = &a.plant {
        task.rollout.plant = Plant::parse(p)?;
    }
    if a.no_align {
        task.file.align_tf3_with_zv = false;
    }
    let mut setup = task.compare_setup(rows).map_err(|e| Failure::usage(e.to_string()))?;
    setup.workers = a.workers.max(1);
    let report = compare_controllers(&setup)?;

    let mut out = OutputDir::create(&a.out)?;
    let table = report.to_table();
    out.write("report.txt", table.as_bytes())?;
    out.write("report.csv", report.to_csv().as_bytes())?;
    let json_report = json!({
        "schema": "flexbeam.compare/1",
        "report": report,
        "config": task_echo(&task),
    });
    out.write("report.json", to_json(&json_report).as_bytes())?;
    for (i, (row, ro)) in report.rows.iter().zip(&report.rollouts).enumerate() {
        if let Some(r) = ro {
            let label = row.controller.to_lowercase().replace(' ', "-");
            out.write(&format!("rollout_{i}_{label}.csv"), r.to_csv().as_bytes())?;
        }
    }
    let mut config = task_echo(&task);
    config["rows"] = json!({"aocp": rows.aocp, "ocp": rows.ocp, "zv": rows.zv});
    config["travel_times"] = json!(report.travel_times);
    out.finish("compare", task_inputs(&task)?, config)?;
    print!("{table}");
    let failed: Vec<_> = report
        .rows
        .iter()
        .filter(|r| r.v.is_none())
        .map(|r| format!("{} @ {:.3} s: {}", r.controller, r.travel_time, r.status))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_SOLVER,
            message: format!("some rows failed: {}", failed.join("; ")),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
struct RepetitionOutcome {
    repetition: usize,
    status: String,
    result: Option<EstimationResult>,
}

/// Adds white Gaussian noise at the given signal-to-noise ratio (dB).
pub fn add_noise(series: &TimeSeries, snr_db: f64, seed: u64) -> Result<TimeSeries> {
    let centered = series.mean_removed();
    let n = centered.len() as f64;
    let rms = (centered.values().iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    let sigma = rms / 10f64.powf(snr_db / 20.0);
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(format!("noise level: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = series.values().iter().map(|v| v + normal.sample(&mut rng)).collect();
    TimeSeries::new(series.times().to_vec(), y)
}

/// Noise seed of one repetition; independent streams per repetition.
pub fn repetition_seed(seed: u64, repetition: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(repetition as u64 + 1)
}

pub fn cmd_estimate(a: &EstimateArgs) -> CmdResult {
    let mut task = Task::load(&a.task)?;
    let mut est = task.estimation.clone();
    if let Some(r) = a.repetitions {
        est.repetitions = r;
    }
    if est.repetitions == 0 {
        return Err(Failure::usage("repetitions must be at least 1"));
    }
    if let Some(db) = a.noise_db {
        est.noise_db = Some(db);
    }
    if a.no_noise {
        est.noise_db = None;
    }
    if let Some(s) = a.smoothing {
        if s % 2 == 0 {
            return Err(Failure::usage("smoothing window must be odd"));
        }
        est.smoothing = s;
    }
    if let Some(agg) = &a.aggregation {
        est.aggregation = agg.clone();
    }
    let policy = crate::estimation::Aggregation::parse(&est.aggregation)?;
    if let Some(p) = &a.plant {
        task.rollout.plant = Plant::parse(p)?;
    }
    let seed = a.seed.unwrap_or(task.file.seed);

    let chain = &task.spec.chain;
    let excitation = design_excitation(
        chain,
        &task.spec.q0,
        Vector3::from(est.displacement),
        &task.spec.bounds,
        est.tf,
        &task.solver,
    )?;
    let mut ro_opts = task.rollout.clone();
    ro_opts.t_r = est.duration;
    let ro = rollout(chain, &task.plant, &excitation, &ro_opts)?;
    let k0 = ro.tf_index();
    let clean = TimeSeries::new(ro.t[k0..].to_vec(), ro.tau[k0..].to_vec())?;
    let opts = IdentifyOptions {
        smoothing: est.smoothing,
        ..IdentifyOptions::default()
    };
    let reps: Vec<usize> = (0..est.repetitions).collect();
    let outcomes = parallel_map(&reps, a.workers.max(1), |&i| {
        let series = match est.noise_db {
            Some(db) => add_noise(&clean, db, repetition_seed(seed, i)),
            None => Ok(clean.clone()),
        };
        match series.and_then(|s| identify(&s, &opts)) {
            Ok(r) => RepetitionOutcome {
                repetition: i,
                status: "ok".into(),
                result: Some(r),
            },
            Err(e) => RepetitionOutcome {
                repetition: i,
                status: format!("error: {e}"),
                result: None,
            },
        }
    });
    let ok: Vec<EstimationResult> = outcomes.iter().filter_map(|o| o.result.clone()).collect();
    let aggregated = aggregate(&ok, policy).ok();
    let reference = linearized_mode_at(chain, &task.plant, &task.spec.q0, &task.rollout.gravity)?;

    let mut out = OutputDir::create(&a.out)?;
    let mut csv = String::from("repetition,status,omega_n,zeta,period,log_decrement,n_peaks\n");
    for o in &outcomes {
        match &o.result {
            Some(r) => csv.push_str(&format!(
                "{},ok,{},{},{},{},{}\n",
                o.repetition, r.omega_n, r.zeta, r.period, r.log_decrement, r.n_peaks
            )),
            None => csv.push_str(&format!("{},{},,,,,\n", o.repetition, o.status.replace(',', ";"))),
        }
    }
    out.write("estimation.csv", csv.as_bytes())?;
    let report = json!({
        "schema": "flexbeam.estimate/1",
        "aggregation": policy.as_str(),
        "omega_n": aggregated.map(|a| a.0),
        "zeta": aggregated.map(|a| a.1),
        "reference": {
            "omega": reference.omega,
            "zeta": reference.zeta,
            "theta_eq": reference.theta_eq,
        },
        "repetitions": outcomes,
    });
    out.write("estimation.json", to_json(&report).as_bytes())?;
    out.write("excitation.csv", excitation.to_csv().as_bytes())?;
    out.write("response.csv", ro.to_csv().as_bytes())?;
    let mut config = task_echo(&task);
    config["estimation"] = json!(est);
    config["seed"] = json!(seed);
    out.finish("estimate", task_inputs(&task)?, config)?;

    match aggregated {
        Some((w, z)) => {
            println!(
                "omega_n = {w:.4} rad/s, zeta = {z:.5} from {}/{} repetitions (reference {:.4} rad/s, {:.5})",
                ok.len(),
                outcomes.len(),
                reference.omega,
                reference.zeta
            );
            Ok(())
        }
        None => Err(Failure {
            code: EXIT_ESTIMATION,
            message: "no repetition produced an estimate".into(),
        }),
    }
}

pub fn cmd_shape(a: &ShapeArgs) -> CmdResult {
    let text = std::fs::read_to_string(&a.trajectory).map_err(|source| Error::Io {
        path: a.trajectory.clone(),
        source,
    })?;
    let traj = JointTrajectory::from_csv_str(&text, &a.trajectory)?;
    let shaper = match a.shaper.as_str() {
        "none" => Shaper::identity(),
        "zv" => {
            let (Some(wn), Some(zeta)) = (a.wn, a.zeta) else {
                return Err(Failure::usage("the zv shaper needs --wn and --zeta"));
            };
            zv_shaper(wn, zeta)?
        }
        other => return Err(Failure::usage(format!("unknown shaper '{other}' (expected zv or none)"))),
    };
    let space = ShapingSpace::parse(&a.space)?;
    let timing = match a.timing.as_str() {
        "exact" => ImpulseTiming::Exact,
        "rounded" => ImpulseTiming::Rounded,
        other => return Err(Failure::usage(format!("unknown timing '{other}' (expected exact or rounded)"))),
    };
    let chain = match &a.chain {
        Some(p) => Some(ChainModel::load(p)?),
        None => None,
    };
    let shaped = shape_trajectory(&traj, &shaper, space, timing, chain.as_ref())?;
    let dir = a.out.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = a
        .out
        .file_name()
        .ok_or_else(|| Failure::usage("--out must name a file"))?
        .to_string_lossy()
        .into_owned();
    let mut out = OutputDir::create(dir)?;
    out.write(&name, shaped.trajectory.to_csv().as_bytes())?;
    let mut inputs = vec![hash_file(&a.trajectory)?];
    if let Some(p) = &a.chain {
        inputs.push(hash_file(p)?);
    }
    let config = json!({
        "shaper": {"times": shaper.times(), "amplitudes": shaper.amplitudes()},
        "space": a.space,
        "timing": a.timing,
        "delay": shaped.delay,
    });
    // one manifest per shaped file
    let manifest_name = format!("{name}.manifest.json");
    let manifest = RunManifest {
        schema: "flexbeam.manifest/1".into(),
        tool_version: TOOL_VERSION.into(),
        command: "shape".into(),
        inputs,
        config,
        outputs: std::mem::take(&mut out.written),
    };
    write_atomic(&dir.join(manifest_name), to_json(&manifest).as_bytes())?;
    println!("shaped trajectory: {} knots, delay {:.6} s", shaped.trajectory.len(), shaped.delay);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_abc() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn error_codes() {
        assert_eq!(Failure::from(Error::Estimation("x".into())).code, EXIT_ESTIMATION);
        assert_eq!(Failure::from(Error::Solver("x".into())).code, EXIT_SOLVER);
        assert_eq!(Failure::from(Error::invalid("x")).code, EXIT_USAGE);
    }

    #[test]
    fn rows_parse() {
        let r = row_selection(&["ocp".into()]).unwrap();
        assert!(r.ocp && !r.aocp && !r.zv);
        assert!(row_selection(&["lqr".into()]).is_err());
    }

    #[test]
    fn repetition_seeds_differ() {
        let s: Vec<u64> = (0..6).map(|i| repetition_seed(7, i)).collect();
        for i in 0..6 {
            for j in 0..i {
                assert_ne!(s[i], s[j]);
            }
        }
    }

    #[test]
    fn noise_level_matches_snr() {
        let t: Vec<f64> = (0..20000).map(|k| k as f64 * 1e-3).collect();
        let y: Vec<f64> = t.iter().map(|t| (5.0 * t).sin()).collect();
        let s = TimeSeries::new(t, y.clone()).unwrap();
        let noisy = add_noise(&s, 20.0, 3).unwrap();
        let var: f64 = noisy.values().iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64;
        // signal rms 1/sqrt(2), 20 dB -> sigma = 0.0707
        assert!((var.sqrt() / (0.5f64.sqrt() / 10.0) - 1.0).abs() < 0.03);
    }
}
