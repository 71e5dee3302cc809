#![allow(dead_code)]

use std::path::PathBuf;

use flexbeam::beam_model::{ParamSet, PendulumParams};
use flexbeam::kinematics::ChainModel;
use flexbeam::task::Task;

pub const TASKS: [&str; 4] = ["t1", "t2", "t3", "zero"];

pub fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

pub fn chain(name: &str) -> ChainModel {
    ChainModel::load(&data(&format!("chains/{name}.toml"))).unwrap()
}

pub fn params(name: &str) -> PendulumParams {
    ParamSet::load(&data(&format!("params/{name}.toml"))).unwrap().params
}

pub fn task(name: &str) -> Task {
    Task::load(&data(&format!("tasks/{name}.toml"))).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

use flexbeam::linalg::SparseMatrix;
use flexbeam::nlp_solver::NlpProblem;

/// `(1 - x)^2 + 100 (y - x^2)^2` inside a box.
pub struct Rosenbrock {
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
}

impl Rosenbrock {
    pub fn unbounded() -> Self {
        Rosenbrock {
            lb: vec![f64::NEG_INFINITY; 2],
            ub: vec![f64::INFINITY; 2],
        }
    }
}

impl NlpProblem for Rosenbrock {
    fn n_vars(&self) -> usize {
        2
    }
    fn n_eq(&self) -> usize {
        0
    }
    fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lb, &self.ub)
    }
    fn objective(&self, z: &[f64]) -> f64 {
        (1.0 - z[0]).powi(2) + 100.0 * (z[1] - z[0] * z[0]).powi(2)
    }
    fn objective_gradient(&self, z: &[f64], g: &mut [f64]) -> f64 {
        let r = z[1] - z[0] * z[0];
        g[0] = -2.0 * (1.0 - z[0]) - 400.0 * z[0] * r;
        g[1] = 200.0 * r;
        self.objective(z)
    }
    fn constraints(&self, _z: &[f64], _out: &mut [f64]) {}
    fn jacobian(&self, _z: &[f64]) -> SparseMatrix {
        SparseMatrix::new(2)
    }
}

/// `min |z|^2` subject to `sum(z) = 1`; the optimum spreads evenly.
pub struct EqualityQp {
    pub n: usize,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
}

impl EqualityQp {
    pub fn new(n: usize) -> Self {
        EqualityQp {
            n,
            lb: vec![f64::NEG_INFINITY; n],
            ub: vec![f64::INFINITY; n],
        }
    }
}

impl NlpProblem for EqualityQp {
    fn n_vars(&self) -> usize {
        self.n
    }
    fn n_eq(&self) -> usize {
        1
    }
    fn bounds(&self) -> (&[f64], &[f64]) {
        (&self.lb, &self.ub)
    }
    fn objective(&self, z: &[f64]) -> f64 {
        z.iter().map(|v| v * v).sum()
    }
    fn objective_gradient(&self, z: &[f64], g: &mut [f64]) -> f64 {
        for (gi, zi) in g.iter_mut().zip(z) {
            *gi = 2.0 * zi;
        }
        self.objective(z)
    }
    fn constraints(&self, z: &[f64], out: &mut [f64]) {
        out[0] = z.iter().sum::<f64>() - 1.0;
    }
    fn jacobian(&self, _z: &[f64]) -> SparseMatrix {
        let mut j = SparseMatrix::new(self.n);
        j.push_row((0..self.n).map(|i| (i, 1.0)));
        j
    }
}
