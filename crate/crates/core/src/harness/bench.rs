//! Benchmark orchestration: full vs screened paths over repeated draws.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::admm::AdmmConfig;
use crate::error::Result;
use crate::harness::generate::{gen_gaussian, gen_shape, GaussianSpec, ShapeSpec};
use crate::model::{
    compute_weights, lambda_max, min_norm_least_squares, GramFactor, TraceRegressionProblem, WeightPair,
};
use crate::path::{compare, BenchRecord, LambdaSchedule, PathOptions, DEFAULT_RATIO};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DataSpec {
    Gaussian(GaussianSpec),
    Shape(ShapeSpec),
}

impl DataSpec {
    pub fn seed(&self) -> u64 {
        match self {
            DataSpec::Gaussian(g) => g.seed,
            DataSpec::Shape(s) => s.seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            DataSpec::Gaussian(g) => g.seed = seed,
            DataSpec::Shape(s) => s.seed = seed,
        }
        self
    }

    pub fn label(&self) -> String {
        match self {
            DataSpec::Gaussian(g) => format!("{}x{}", g.p, g.q),
            DataSpec::Shape(s) => format!("{}-{}", s.shape, s.size),
        }
    }

    pub fn generate(&self) -> Result<(TraceRegressionProblem, DMatrix<f64>)> {
        match self {
            DataSpec::Gaussian(g) => gen_gaussian(g),
            DataSpec::Shape(s) => gen_shape(s),
        }
    }
}

/// Shared preprocessing, excluded from path timings.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub gram: GramFactor,
    pub b_ls: DMatrix<f64>,
    pub weights: WeightPair,
    pub lambda_max: f64,
}

pub fn prepare(problem: &TraceRegressionProblem, gamma: f64) -> Result<Prepared> {
    let gram = GramFactor::new(problem)?;
    let b_ls = min_norm_least_squares(problem, &gram);
    let weights = compute_weights(&b_ls, gamma, problem.n())?;
    let lambda_max = lambda_max(problem, &weights);
    Ok(Prepared { gram, b_ls, weights, lambda_max })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub k: usize,
    pub ratio: f64,
    pub reps: usize,
    pub gamma: f64,
    pub admm: AdmmConfig,
    pub path: PathOptions,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            k: 20,
            ratio: DEFAULT_RATIO,
            reps: 10,
            gamma: 1.0,
            admm: AdmmConfig::default(),
            path: PathOptions::default(),
        }
    }
}

/// One fresh draw (seed, seed+1, …) per repetition.
pub fn bench_one(spec: &DataSpec, cfg: &BenchConfig) -> Result<BenchRecord> {
    let mut runs = Vec::with_capacity(cfg.reps);
    for r in 0..cfg.reps as u64 {
        let spec = spec.with_seed(spec.seed() + r);
        let (problem, _) = spec.generate()?;
        let prep = prepare(&problem, cfg.gamma)?;
        let schedule = LambdaSchedule::geometric(prep.lambda_max, cfg.k, cfg.ratio)?;
        runs.push(compare(&spec.label(), &problem, &prep.weights, &prep.gram, &schedule, &cfg.admm, &cfg.path, 1)?);
    }
    BenchRecord::aggregate(&spec.label(), &runs)
}

pub fn bench(specs: &[DataSpec], cfg: &BenchConfig) -> Result<Vec<BenchRecord>> {
    specs.iter().map(|s| bench_one(s, cfg)).collect()
}
