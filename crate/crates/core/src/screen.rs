//! Safe subspace screening.
//!
//! Given a dual point θ̂(λ₀) and a target λ > λ₀, the dual optimum at λ
//! lies in Ω = {θ : ⟨α, θ⟩ ≥ b} ∩ {‖θ − c‖² ≤ η²}. The rank-one direction
//! u_j v_kᵀ of the basis pair can be dropped when both
//! `sup_Ω ±⟨B̂, u_jv_kᵀ⟩` bounds vanish.

use nalgebra::{DMatrix, DVector};

use crate::admm::GeneralizedInstance;
use crate::error::{Error, Result};
use crate::model::{GramFactor, TraceRegressionProblem, WeightPair};
use crate::prox;

/// Orthogonal bases U ∈ O^p, V ∈ O^q.
#[derive(Debug, Clone)]
pub struct BasisPair {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl BasisPair {
    pub fn identity(p: usize, q: usize) -> Self {
        Self { u: DMatrix::identity(p, p), v: DMatrix::identity(q, q) }
    }

    /// Full singular bases of `b`.
    pub fn from_svd(b: &DMatrix<f64>) -> Result<Self> {
        let t = prox::svd(b, true)?;
        Ok(Self { u: t.u_full.expect("full"), v: t.v_full.expect("full") })
    }

    pub fn orthogonality_error(&self) -> f64 {
        let (p, q) = (self.u.nrows(), self.v.nrows());
        let eu = (self.u.tr_mul(&self.u) - DMatrix::<f64>::identity(p, p)).amax();
        let ev = (self.v.tr_mul(&self.v) - DMatrix::<f64>::identity(q, q)).amax();
        eu.max(ev)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScreenContext<'a> {
    pub lambda0: f64,
    pub lambda: f64,
    pub theta_prev: &'a DVector<f64>,
    pub problem: &'a TraceRegressionProblem,
    pub gram: &'a GramFactor,
    pub basis: &'a BasisPair,
    pub weights: &'a WeightPair,
}

impl<'a> ScreenContext<'a> {
    pub fn new(
        lambda0: f64,
        lambda: f64,
        theta_prev: &'a DVector<f64>,
        problem: &'a TraceRegressionProblem,
        gram: &'a GramFactor,
        basis: &'a BasisPair,
        weights: &'a WeightPair,
    ) -> Result<Self> {
        if !(lambda0 > 0.0) {
            return Err(Error::InvalidArgument(format!("lambda0 must be positive, got {lambda0}")));
        }
        if !(lambda > lambda0) {
            return Err(Error::InvalidArgument(format!("need lambda > lambda0, got {lambda} <= {lambda0}")));
        }
        if theta_prev.len() != problem.n() {
            return Err(Error::Dimension("theta_prev length differs from n".into()));
        }
        if basis.u.shape() != (problem.p(), problem.p()) || basis.v.shape() != (problem.q(), problem.q()) {
            return Err(Error::Dimension("basis pair does not match p, q".into()));
        }
        let err = basis.orthogonality_error();
        if err > 1e-10 {
            return Err(Error::InvalidArgument(format!("basis not orthogonal (error {err:.3e})")));
        }
        Ok(Self { lambda0, lambda, theta_prev, problem, gram, basis, weights })
    }
}

/// Quantities defining Ω; independent of (j, k).
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenScalars {
    pub alpha: DVector<f64>,
    pub b: f64,
    pub c: DVector<f64>,
    pub eta_sq: f64,
}

impl ScreenScalars {
    pub fn from_parts(theta_prev: &DVector<f64>, y: &DVector<f64>, lambda0: f64, lambda: f64) -> Result<Self> {
        if !(lambda0 > 0.0) {
            return Err(Error::InvalidArgument("lambda0 must be positive".into()));
        }
        let n = y.len() as f64;
        let alpha = theta_prev + y / (n * lambda0);
        let b = theta_prev.dot(&alpha);
        let c = (theta_prev - y / (n * lambda)) / 2.0;
        let eta_sq = (theta_prev + y / (n * lambda)).norm_squared() / 4.0;
        Ok(Self { alpha, b, c, eta_sq })
    }

    /// ‖α‖²η² − (b − ⟨c,α⟩)², clamped at zero.
    pub fn slack(&self) -> f64 {
        let t = self.b - self.c.dot(&self.alpha);
        (self.alpha.norm_squared() * self.eta_sq - t * t).max(0.0)
    }

    /// Slack relative to ‖α‖²η²; 0 means Ω is a single point.
    pub fn relative_slack(&self) -> f64 {
        let s = self.alpha.norm_squared() * self.eta_sq;
        if s > 0.0 {
            self.slack() / s
        } else {
            0.0
        }
    }

    pub fn contains(&self, theta: &DVector<f64>, tol: f64) -> bool {
        let half = self.alpha.dot(theta) - self.b >= -tol * (1.0 + self.b.abs());
        let ball = (theta - &self.c).norm_squared() <= self.eta_sq * (1.0 + tol) + tol;
        half && ball
    }
}

pub fn compute_scalars(ctx: &ScreenContext) -> Result<ScreenScalars> {
    ScreenScalars::from_parts(ctx.theta_prev, ctx.problem.y(), ctx.lambda0, ctx.lambda)
}

/// Relative threshold under which 2ν's numerator or denominator counts as zero.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// max ⟨γ, θ⟩ over Ω from the inner products ‖γ‖², ⟨γ,α⟩ and ⟨c,γ⟩.
pub fn f_opt_from_products(gg: f64, ga: f64, cg: f64, s: &ScreenScalars) -> f64 {
    if gg <= 0.0 {
        return 0.0;
    }
    let aa = s.alpha.norm_squared();
    let eta = s.eta_sq.sqrt();
    let sphere = cg + eta * gg.sqrt();
    let t = s.b - s.c.dot(&s.alpha);
    let num = gg * aa - ga * ga;
    let den = aa * s.eta_sq - t * t;
    if num <= DEGENERATE_TOL * gg * aa || den <= DEGENERATE_TOL * aa * s.eta_sq {
        return sphere;
    }
    let two_nu = (num / den).sqrt();
    if ga < two_nu * t {
        cg + gg / two_nu + (t / aa - ga / (two_nu * aa)) * ga
    } else {
        sphere
    }
}

pub fn f_opt(gamma: &DVector<f64>, s: &ScreenScalars) -> f64 {
    f_opt_from_products(gamma.norm_squared(), gamma.dot(&s.alpha), s.c.dot(gamma), s)
}

/// Row i is vec(Uᵀ Xᵢ V).
pub fn rotated_design(problem: &TraceRegressionProblem, basis: &BasisPair) -> DMatrix<f64> {
    let (n, p, q) = (problem.n(), problem.p(), problem.q());
    let mut r = DMatrix::zeros(n, p * q);
    let ut = basis.u.transpose();
    for (i, xi) in problem.x().iter().enumerate() {
        let m = &ut * xi * &basis.v;
        r.row_mut(i).copy_from_slice(m.as_slice());
    }
    r
}

/// γ_{jk} = nλ(𝒳𝒳ᵀ)⁻¹𝒳 vec(u_j v_kᵀ).
pub fn gamma_for(ctx: &ScreenContext, j: usize, k: usize) -> DVector<f64> {
    let dir = ctx.basis.u.column(j) * ctx.basis.v.column(k).transpose();
    let proj = ctx.problem.apply(&dir);
    ctx.gram.solve(&proj) * (ctx.problem.n() as f64 * ctx.lambda)
}

/// All γ_{jk} as columns, column j + k·p, from one rotated design.
pub fn gamma_batch(ctx: &ScreenContext, rotated: &DMatrix<f64>) -> DMatrix<f64> {
    ctx.gram.solve_mat(rotated) * (ctx.problem.n() as f64 * ctx.lambda)
}

/// (P⁽¹⁾, P⁽²⁾) for direction (j, k).
pub fn p_values(ctx: &ScreenContext, s: &ScreenScalars, j: usize, k: usize) -> (f64, f64) {
    let dir = ctx.basis.u.column(j) * ctx.basis.v.column(k).transpose();
    let w = ctx.gram.solve(ctx.problem.y());
    let base = w.dot(&ctx.problem.apply(&dir));
    let g = gamma_for(ctx, j, k);
    (base + f_opt(&g, s), -base + f_opt(&(-&g), s))
}

#[derive(Debug, Clone)]
pub struct ScreenOutcome {
    /// W_{jk} = max(P⁽¹⁾, P⁽²⁾).
    pub w: DMatrix<f64>,
    pub screened_rows: Vec<usize>,
    pub screened_cols: Vec<usize>,
    pub kept_rows: Vec<usize>,
    pub kept_cols: Vec<usize>,
    pub epsilon: f64,
    pub scalars: ScreenScalars,
    /// None when every row or every column is screened.
    pub reduced: Option<GeneralizedInstance>,
}

impl ScreenOutcome {
    pub fn kept_dims(&self) -> (usize, usize) {
        (self.kept_rows.len(), self.kept_cols.len())
    }
}

/// Default zero tolerance for W: 1e-9·(1 + max|W|).
pub fn default_epsilon(w: &DMatrix<f64>) -> f64 {
    1e-9 * (1.0 + w.amax())
}

pub fn screen(ctx: &ScreenContext, epsilon: Option<f64>) -> Result<ScreenOutcome> {
    let (p, q) = (ctx.problem.p(), ctx.problem.q());
    let s = compute_scalars(ctx)?;
    let rotated = rotated_design(ctx.problem, ctx.basis);
    let gammas = gamma_batch(ctx, &rotated);
    let base = rotated.tr_mul(&ctx.gram.solve(ctx.problem.y()));
    let gg: Vec<f64> = gammas.column_iter().map(|g| g.norm_squared()).collect();
    let ga = gammas.tr_mul(&s.alpha);
    let cg = gammas.tr_mul(&s.c);
    let mut w = DMatrix::zeros(p, q);
    for k in 0..q {
        for j in 0..p {
            let idx = j + k * p;
            let p1 = base[idx] + f_opt_from_products(gg[idx], ga[idx], cg[idx], &s);
            let p2 = -base[idx] + f_opt_from_products(gg[idx], -ga[idx], -cg[idx], &s);
            w[(j, k)] = p1.max(p2);
        }
    }
    let eps = epsilon.unwrap_or_else(|| default_epsilon(&w));
    let row_max = |j: usize| w.row(j).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let col_max = |k: usize| w.column(k).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (screened_rows, kept_rows): (Vec<usize>, Vec<usize>) = (0..p).partition(|&j| row_max(j) <= eps);
    let (screened_cols, kept_cols): (Vec<usize>, Vec<usize>) = (0..q).partition(|&k| col_max(k) <= eps);
    let reduced = if kept_rows.is_empty() || kept_cols.is_empty() {
        None
    } else {
        Some(reduced_instance(ctx, &rotated, &kept_rows, &kept_cols)?)
    };
    Ok(ScreenOutcome { w, screened_rows, screened_cols, kept_rows, kept_cols, epsilon: eps, scalars: s, reduced })
}

/// Xtᵢ = U_{:,I₁ᶜ}ᵀXᵢV_{:,I₂ᶜ}, M1 = W₁U_{:,I₁ᶜ}, M2 = V_{:,I₂ᶜ}ᵀW₂,
/// embedded back through B = U_{:,I₁ᶜ} Θ V_{:,I₂ᶜ}ᵀ.
pub fn reduced_instance(
    ctx: &ScreenContext,
    rotated: &DMatrix<f64>,
    kept_rows: &[usize],
    kept_cols: &[usize],
) -> Result<GeneralizedInstance> {
    let p = ctx.problem.p();
    let (d1, d2) = (kept_rows.len(), kept_cols.len());
    let n = ctx.problem.n();
    let mut design = DMatrix::zeros(n, d1 * d2);
    for (b, &k) in kept_cols.iter().enumerate() {
        for (a, &j) in kept_rows.iter().enumerate() {
            design.set_column(a + b * d1, &rotated.column(j + k * p));
        }
    }
    let us = ctx.basis.u.select_columns(kept_rows);
    let vs = ctx.basis.v.select_columns(kept_cols);
    let m1 = &ctx.weights.w1 * &us;
    let m2 = vs.transpose() * &ctx.weights.w2;
    GeneralizedInstance::new(design, d1, d2, ctx.problem.y().clone(), m1, m2, ctx.lambda)?.with_embedding(us, vs)
}
