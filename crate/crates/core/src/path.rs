//! Solution paths over a geometric λ grid: the plain path (one ADMM solve
//! per λ) and the sequential screened path.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::admm::{self, AdmmConfig, GeneralizedInstance, WarmStart};
use crate::error::{Error, Result};
use crate::model::{min_norm_least_squares, GramFactor, TraceRegressionProblem, WeightPair};
use crate::prox;
use crate::screen::{self, BasisPair, ScreenContext};

pub const DEFAULT_RATIO: f64 = 0.616;

/// λ_m = ratio^m·λ_max for m = K…1, stored ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSchedule {
    pub lambda_max: f64,
    pub k: usize,
    pub ratio: f64,
    pub values: Vec<f64>,
}

impl LambdaSchedule {
    pub fn geometric(lambda_max: f64, k: usize, ratio: f64) -> Result<Self> {
        if !(lambda_max > 0.0) || !lambda_max.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda_max must be positive, got {lambda_max}")));
        }
        if k == 0 {
            return Err(Error::InvalidArgument("path length must be positive".into()));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidArgument(format!("ratio must lie in (0,1), got {ratio}")));
        }
        let values = (1..=k).rev().map(|m| ratio.powi(m as i32) * lambda_max).collect();
        Ok(Self { lambda_max, k, ratio, values })
    }

    /// A schedule from explicit values (sorted ascending).
    pub fn explicit(lambda_max: f64, mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidArgument("lambda values must be positive".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { lambda_max, k: values.len(), ratio: f64::NAN, values })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathMode {
    Full,
    Screened,
}

/// How the screened path obtains its first point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FirstPoint {
    /// ADMM solve at λ₁ with its KKT dual.
    Solve,
    /// Minimum-norm interpolant B_LS with θ̂ = 0.
    Interpolant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOptions {
    pub warm_start: bool,
    /// Zero tolerance for W; None uses the relative default.
    pub epsilon: Option<f64>,
    pub first_point: FirstPoint,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self { warm_start: false, epsilon: None, first_point: FirstPoint::Solve }
    }
}

#[derive(Debug, Clone)]
pub struct PathRecord {
    pub lambda: f64,
    pub b: DMatrix<f64>,
    /// (𝒳vec(B̂) − y)/(nλ).
    pub theta: DVector<f64>,
    pub objective: f64,
    pub rank: usize,
    pub iters: usize,
    pub converged: bool,
    pub solve_ms: f64,
    pub screen_ms: f64,
    pub screened_rows: usize,
    pub screened_cols: usize,
    pub kept_dims: (usize, usize),
}

#[derive(Debug, Clone)]
pub struct PathResult {
    pub mode: PathMode,
    pub records: Vec<PathRecord>,
    /// Wall time of the whole path (solves plus screening).
    pub wall_ms: f64,
}

impl PathResult {
    pub fn converged(&self) -> bool {
        self.records.iter().all(|r| r.converged)
    }
}

fn numerical_rank(b: &DMatrix<f64>) -> usize {
    prox::svd(b, false).map(|t| t.rank()).unwrap_or(0)
}

pub fn full_path(
    problem: &TraceRegressionProblem,
    weights: &WeightPair,
    schedule: &LambdaSchedule,
    config: &AdmmConfig,
    opts: &PathOptions,
) -> Result<PathResult> {
    let start = Instant::now();
    let base = GeneralizedInstance::from_problem(problem, weights, schedule.values[0])?;
    let cache = admm::precompute(&base)?;
    let mut warm: Option<WarmStart> = None;
    let mut records = Vec::with_capacity(schedule.k);
    for &lambda in &schedule.values {
        let t = Instant::now();
        let inst = base.with_lambda(lambda);
        let sol = admm::solve_with_cache(&inst, &cache, config, if opts.warm_start { warm.as_ref() } else { None })?;
        let solve_ms = t.elapsed().as_secs_f64() * 1e3;
        if !sol.converged {
            log::warn!("full path: no convergence at lambda={lambda:.6e}");
        }
        records.push(PathRecord {
            lambda,
            theta: problem.kkt_dual(&sol.b, lambda),
            objective: problem.objective(weights, &sol.b, lambda),
            b: sol.b,
            rank: sol.rank,
            iters: sol.iters,
            converged: sol.converged,
            solve_ms,
            screen_ms: 0.0,
            screened_rows: 0,
            screened_cols: 0,
            kept_dims: (problem.p(), problem.q()),
        });
        warm = Some(sol.warm);
    }
    Ok(PathResult { mode: PathMode::Full, records, wall_ms: start.elapsed().as_secs_f64() * 1e3 })
}

/// Sequential screened path. For each λ_m after the first, the previous
/// solution's full singular bases and dual point define the screening
/// test; the kept subspace is solved and embedded back.
pub fn screened_path(
    problem: &TraceRegressionProblem,
    weights: &WeightPair,
    gram: &GramFactor,
    schedule: &LambdaSchedule,
    config: &AdmmConfig,
    opts: &PathOptions,
) -> Result<PathResult> {
    let start = Instant::now();
    let (p, q) = (problem.p(), problem.q());
    let mut records = Vec::with_capacity(schedule.k);
    let lambda1 = schedule.values[0];
    let t = Instant::now();
    let (b1, theta1, rank1, iters1, conv1, mut warm) = match opts.first_point {
        FirstPoint::Solve => {
            let inst = GeneralizedInstance::from_problem(problem, weights, lambda1)?;
            let sol = admm::solve(&inst, config, None)?;
            let th = problem.kkt_dual(&sol.b, lambda1);
            (sol.b, th, sol.rank, sol.iters, sol.converged, Some(sol.warm))
        }
        FirstPoint::Interpolant => {
            let b = min_norm_least_squares(problem, gram);
            let r = numerical_rank(&b);
            (b, DVector::zeros(problem.n()), r, 0, true, None)
        }
    };
    records.push(PathRecord {
        lambda: lambda1,
        objective: problem.objective(weights, &b1, lambda1),
        b: b1,
        theta: theta1,
        rank: rank1,
        iters: iters1,
        converged: conv1,
        solve_ms: t.elapsed().as_secs_f64() * 1e3,
        screen_ms: 0.0,
        screened_rows: 0,
        screened_cols: 0,
        kept_dims: (p, q),
    });
    let screening = problem.full_row_rank();
    for m in 1..schedule.k {
        let (lambda0, lambda) = (schedule.values[m - 1], schedule.values[m]);
        let prev = records.last().expect("first record");
        let ts = Instant::now();
        let basis = BasisPair::from_svd(&prev.b)?;
        let (rows, cols, kept, reduced) = if screening {
            let ctx = ScreenContext::new(lambda0, lambda, &prev.theta, problem, gram, &basis, weights)?;
            let out = screen::screen(&ctx, opts.epsilon)?;
            (out.screened_rows.len(), out.screened_cols.len(), out.kept_dims(), out.reduced)
        } else {
            let rotated = screen::rotated_design(problem, &basis);
            let ctx = ScreenContext::new(lambda0, lambda, &prev.theta, problem, gram, &basis, weights)?;
            let all_p: Vec<usize> = (0..p).collect();
            let all_q: Vec<usize> = (0..q).collect();
            (0, 0, (p, q), Some(screen::reduced_instance(&ctx, &rotated, &all_p, &all_q)?))
        };
        let screen_ms = ts.elapsed().as_secs_f64() * 1e3;
        let t = Instant::now();
        let (b, rank, iters, converged, next_warm) = match reduced {
            Some(inst) => {
                let sol = admm::solve(&inst, config, if opts.warm_start { warm.as_ref() } else { None })?;
                (sol.b, sol.rank, sol.iters, sol.converged, Some(sol.warm))
            }
            None => (DMatrix::zeros(p, q), 0, 0, true, None),
        };
        let solve_ms = t.elapsed().as_secs_f64() * 1e3;
        if !converged {
            log::warn!("screened path: no convergence at lambda={lambda:.6e}");
        }
        warm = next_warm;
        records.push(PathRecord {
            lambda,
            theta: problem.kkt_dual(&b, lambda),
            objective: problem.objective(weights, &b, lambda),
            b,
            rank,
            iters,
            converged,
            solve_ms,
            screen_ms,
            screened_rows: rows,
            screened_cols: cols,
            kept_dims: kept,
        });
    }
    Ok(PathResult { mode: PathMode::Screened, records, wall_ms: start.elapsed().as_secs_f64() * 1e3 })
}

/// Sample mean and unbiased variance (0 for a single value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanVar {
    pub mean: f64,
    pub var: f64,
}

impl MeanVar {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        if xs.is_empty() {
            return Self { mean: f64::NAN, var: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() < 2 { 0.0 } else { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) };
        Self { mean, var }
    }
}

/// Per-λ agreement between the two paths (last repetition).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub lambda: f64,
    pub objective_full: f64,
    pub objective_screened: f64,
    pub objective_gap: f64,
    pub solution_gap: f64,
    pub iters_full: usize,
    pub iters_screened: usize,
    pub screened_rows: usize,
    pub screened_cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub label: String,
    pub p: usize,
    pub q: usize,
    pub n: usize,
    pub reps: usize,
    pub t_f_ms: Vec<f64>,
    pub t_s_ms: Vec<f64>,
    pub t_f: MeanVar,
    pub t_s: MeanVar,
    pub speedup: MeanVar,
    pub safety_ok: bool,
    pub all_converged: bool,
    pub max_objective_gap: f64,
    pub max_solution_gap: f64,
    pub rows: Vec<CompareRow>,
}

/// Relative objective mismatch above which a comparison is unsafe.
pub const SAFETY_OBJECTIVE_TOL: f64 = 1e-4;

fn rel(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else {
        d / a.abs().max(b.abs())
    }
}

/// Per-λ (objective gap, solution gap) between two paths.
pub fn path_gaps(full: &PathResult, screened: &PathResult) -> Vec<(f64, f64)> {
    full.records
        .iter()
        .zip(&screened.records)
        .map(|(f, s)| {
            let d = (&f.b - &s.b).norm();
            let sg = if d == 0.0 { 0.0 } else { d / f.b.norm().max(s.b.norm()) };
            (rel(f.objective, s.objective), sg)
        })
        .collect()
}

impl BenchRecord {
    /// Aggregate single-run records (e.g. one per seed) into one record.
    pub fn aggregate(label: &str, runs: &[BenchRecord]) -> Result<Self> {
        let first = runs.first().ok_or_else(|| Error::InvalidArgument("no runs to aggregate".into()))?;
        let t_f_ms: Vec<f64> = runs.iter().flat_map(|r| r.t_f_ms.iter().copied()).collect();
        let t_s_ms: Vec<f64> = runs.iter().flat_map(|r| r.t_s_ms.iter().copied()).collect();
        let speeds: Vec<f64> = t_f_ms.iter().zip(&t_s_ms).map(|(f, s)| f / s).collect();
        Ok(Self {
            label: label.to_string(),
            p: first.p,
            q: first.q,
            n: first.n,
            reps: t_f_ms.len(),
            t_f: MeanVar::of(&t_f_ms),
            t_s: MeanVar::of(&t_s_ms),
            speedup: MeanVar::of(&speeds),
            t_f_ms,
            t_s_ms,
            safety_ok: runs.iter().all(|r| r.safety_ok),
            all_converged: runs.iter().all(|r| r.all_converged),
            max_objective_gap: runs.iter().map(|r| r.max_objective_gap).fold(0.0, f64::max),
            max_solution_gap: runs.iter().map(|r| r.max_solution_gap).fold(0.0, f64::max),
            rows: runs.last().expect("nonempty").rows.clone(),
        })
    }
}

/// Run both paths `reps` times on one problem and compare them.
#[allow(clippy::too_many_arguments)]
pub fn compare(
    label: &str,
    problem: &TraceRegressionProblem,
    weights: &WeightPair,
    gram: &GramFactor,
    schedule: &LambdaSchedule,
    config: &AdmmConfig,
    opts: &PathOptions,
    reps: usize,
) -> Result<BenchRecord> {
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be at least 1".into()));
    }
    let mut t_f_ms = Vec::with_capacity(reps);
    let mut t_s_ms = Vec::with_capacity(reps);
    let mut last = None;
    for _ in 0..reps {
        let f = full_path(problem, weights, schedule, config, opts)?;
        let s = screened_path(problem, weights, gram, schedule, config, opts)?;
        t_f_ms.push(f.wall_ms);
        t_s_ms.push(s.wall_ms);
        last = Some((f, s));
    }
    let (f, s) = last.expect("reps >= 1");
    let gaps = path_gaps(&f, &s);
    let rows: Vec<CompareRow> = f
        .records
        .iter()
        .zip(&s.records)
        .zip(&gaps)
        .map(|((a, b), &(og, sg))| CompareRow {
            lambda: a.lambda,
            objective_full: a.objective,
            objective_screened: b.objective,
            objective_gap: og,
            solution_gap: sg,
            iters_full: a.iters,
            iters_screened: b.iters,
            screened_rows: b.screened_rows,
            screened_cols: b.screened_cols,
        })
        .collect();
    let max_objective_gap = gaps.iter().map(|g| g.0).fold(0.0, f64::max);
    let max_solution_gap = gaps.iter().map(|g| g.1).fold(0.0, f64::max);
    let speeds: Vec<f64> = t_f_ms.iter().zip(&t_s_ms).map(|(a, b)| a / b).collect();
    if max_objective_gap > SAFETY_OBJECTIVE_TOL {
        log::warn!("{label}: screened objective differs by {max_objective_gap:.3e} (relative)");
    }
    Ok(BenchRecord {
        label: label.to_string(),
        p: problem.p(),
        q: problem.q(),
        n: problem.n(),
        reps,
        t_f: MeanVar::of(&t_f_ms),
        t_s: MeanVar::of(&t_s_ms),
        speedup: MeanVar::of(&speeds),
        t_f_ms,
        t_s_ms,
        safety_ok: max_objective_gap <= SAFETY_OBJECTIVE_TOL,
        all_converged: f.converged() && s.converged(),
        max_objective_gap,
        max_solution_gap,
        rows,
    })
}
