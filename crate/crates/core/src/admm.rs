//! ADMM for
//!
//! ```text
//! min_Θ (1/2n) Σ (yᵢ − ⟨Xtᵢ, Θ⟩)² + λ ‖M1 Θ M2‖_*
//! ```
//!
//! with splitting α = y − 𝒳̃vec(Θ), C = M1ΘM2. The original problem is the
//! case M1 = W₁, M2 = W₂; screening produces reduced instances of the
//! same form.
//!
//! The Θ-subproblem is solved in whitened coordinates. With thin SVDs
//! `M1 = P1 Σ1 E1ᵀ` and `M2ᵀ = P2 Σ2 E2ᵀ`, put `Z = Σ1 E1ᵀ Θ E2 Σ2`, so that
//! `M1ΘM2 = P1 Z P2ᵀ` and `⟨Xtᵢ,Θ⟩ = ⟨Gᵢ, Z⟩` with
//! `Gᵢ = (E1ᵀ Xtᵢ E2) ./ (s1 s2ᵀ)`. The normal equations become
//! `σ(I + GᵀG) z = rhs`, solved by Woodbury with a Cholesky factor of the
//! n×n matrix `I + GGᵀ`. The iterates are those of the dense
//! `(𝒳̃ᵀ𝒳̃ + M2M2ᵀ ⊗ M1ᵀM1)` formulation mapped through `Θ ↦ Z`, but the
//! conditioning no longer depends on the weights. When M1 or M2 is
//! numerically rank deficient the dense system is used instead, through
//! its pseudo-inverse.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{kron, unvec, vec, TraceRegressionProblem, WeightPair};
use crate::prox;

#[derive(Debug)]
struct InstanceData {
    d1: usize,
    d2: usize,
    design: DMatrix<f64>,
    y: DVector<f64>,
    m1: DMatrix<f64>,
    m2: DMatrix<f64>,
    embedding: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

/// `min (1/2n)‖y − 𝒳̃vec(Θ)‖² + λ‖M1ΘM2‖_*` over Θ ∈ ℝ^{d1×d2}.
///
/// The data is shared, so [`GeneralizedInstance::with_lambda`] is cheap.
#[derive(Debug, Clone)]
pub struct GeneralizedInstance {
    data: Arc<InstanceData>,
    lambda: f64,
}

impl GeneralizedInstance {
    /// `design` is n×(d1·d2) with row i = vec(Xtᵢ); `m1` is p×d1, `m2` is d2×q.
    pub fn new(
        design: DMatrix<f64>,
        d1: usize,
        d2: usize,
        y: DVector<f64>,
        m1: DMatrix<f64>,
        m2: DMatrix<f64>,
        lambda: f64,
    ) -> Result<Self> {
        if design.ncols() != d1 * d2 || design.nrows() != y.len() {
            return Err(Error::Dimension(format!(
                "design is {}x{}, expected {}x{}",
                design.nrows(),
                design.ncols(),
                y.len(),
                d1 * d2
            )));
        }
        if m1.ncols() != d1 || m2.nrows() != d2 {
            return Err(Error::Dimension(format!(
                "maps are {}x{} and {}x{} for a {d1}x{d2} coefficient",
                m1.nrows(),
                m1.ncols(),
                m2.nrows(),
                m2.ncols()
            )));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self { data: Arc::new(InstanceData { d1, d2, design, y, m1, m2, embedding: None }), lambda })
    }

    /// The original problem: Xtᵢ = Xᵢ, M1 = W₁, M2 = W₂.
    pub fn from_problem(problem: &TraceRegressionProblem, weights: &WeightPair, lambda: f64) -> Result<Self> {
        Self::new(
            problem.design().clone(),
            problem.p(),
            problem.q(),
            problem.y().clone(),
            weights.w1.clone(),
            weights.w2.clone(),
            lambda,
        )
    }

    /// Attach `B = U Θ Vᵀ` as the map from coefficients to p×q solutions.
    pub fn with_embedding(self, u: DMatrix<f64>, v: DMatrix<f64>) -> Result<Self> {
        let d = &self.data;
        if u.ncols() != d.d1 || v.ncols() != d.d2 {
            return Err(Error::Dimension("embedding bases do not match coefficient shape".into()));
        }
        let data = InstanceData {
            d1: d.d1,
            d2: d.d2,
            design: d.design.clone(),
            y: d.y.clone(),
            m1: d.m1.clone(),
            m2: d.m2.clone(),
            embedding: Some((u, v)),
        };
        Ok(Self { data: Arc::new(data), lambda: self.lambda })
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        assert!(lambda > 0.0, "lambda must be positive");
        Self { data: Arc::clone(&self.data), lambda }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn n(&self) -> usize {
        self.data.y.len()
    }
    pub fn d1(&self) -> usize {
        self.data.d1
    }
    pub fn d2(&self) -> usize {
        self.data.d2
    }
    pub fn p(&self) -> usize {
        self.data.m1.nrows()
    }
    pub fn q(&self) -> usize {
        self.data.m2.ncols()
    }
    pub fn design(&self) -> &DMatrix<f64> {
        &self.data.design
    }
    pub fn y(&self) -> &DVector<f64> {
        &self.data.y
    }
    pub fn m1(&self) -> &DMatrix<f64> {
        &self.data.m1
    }
    pub fn m2(&self) -> &DMatrix<f64> {
        &self.data.m2
    }

    pub fn xt(&self, i: usize) -> DMatrix<f64> {
        let row: Vec<f64> = self.data.design.row(i).iter().copied().collect();
        unvec(&row, self.d1(), self.d2())
    }

    /// Map a coefficient Θ to the p×q solution.
    pub fn embed(&self, coef: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.data.embedding {
            Some((u, v)) => u * coef * v.transpose(),
            None => coef.clone(),
        }
    }

    /// Coefficient whose embedding is the projection of `b` onto the kept subspace.
    pub fn unembed(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.data.embedding {
            Some((u, v)) => u.transpose() * b * v,
            None => b.clone(),
        }
    }

    pub fn objective(&self, coef: &DMatrix<f64>) -> f64 {
        let r = self.y() - self.design() * vec(coef);
        r.norm_squared() / (2.0 * self.n() as f64) + self.lambda * prox::nuclear_norm(&(self.m1() * coef * self.m2()))
    }
}

/// How σ is chosen for a given λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Penalty {
    Fixed(f64),
    /// σ = factor·λ/rms(y), so the iterates are equivariant under rescaling
    /// y and λ together.
    Proportional(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    pub penalty: Penalty,
    pub tau: f64,
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub max_iter: usize,
}

pub const GOLDEN: f64 = 1.618_033_988_749_895;

impl Default for AdmmConfig {
    fn default() -> Self {
        Self { penalty: Penalty::Proportional(1.0), tau: 1.618, tol_primal: 1e-6, tol_dual: 1e-6, max_iter: 5000 }
    }
}

impl AdmmConfig {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol_primal = tol;
        self.tol_dual = tol;
        self
    }

    /// `y_rms` is ‖y‖/√n; zero falls back to 1.
    pub fn sigma(&self, lambda: f64, y_rms: f64) -> f64 {
        match self.penalty {
            Penalty::Fixed(s) => s,
            Penalty::Proportional(k) => k * lambda / if y_rms > 0.0 { y_rms } else { 1.0 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = match self.penalty {
            Penalty::Fixed(s) | Penalty::Proportional(s) => s,
        };
        if !(s > 0.0) {
            return Err(Error::InvalidArgument(format!("penalty must be positive, got {s}")));
        }
        if !(self.tau > 0.0 && self.tau < GOLDEN) {
            return Err(Error::InvalidArgument(format!("tau must lie in (0, {GOLDEN}), got {}", self.tau)));
        }
        if !(self.tol_primal > 0.0 && self.tol_dual > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug)]
enum Kind {
    Whitened {
        p1: DMatrix<f64>,
        s1: DVector<f64>,
        e1: DMatrix<f64>,
        p2: DMatrix<f64>,
        s2: DVector<f64>,
        e2: DMatrix<f64>,
        chol: Cholesky<f64, Dyn>,
    },
    Dense {
        pinv: DMatrix<f64>,
    },
}

/// λ-independent factorization of the Θ-subproblem.
#[derive(Debug)]
pub struct FactorCache {
    kind: Kind,
    /// Design in solver coordinates: G (whitened) or 𝒳̃ (dense).
    h: DMatrix<f64>,
    hty: DVector<f64>,
    d1: usize,
    d2: usize,
    m1: DMatrix<f64>,
    m2: DMatrix<f64>,
}

/// Singular-value ratio of M1 or M2 below which the dense fallback is used.
pub const MAP_RANK_FLOOR: f64 = 1e-12;

fn thin_svd(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let t = prox::svd(m, true)?;
    let k = m.nrows().min(m.ncols());
    let sv = prox::singular_values(m);
    let u = t.u_full.expect("full").columns(0, k).into_owned();
    let v = t.v_full.expect("full").columns(0, k).into_owned();
    Ok((u, sv, v))
}

pub fn precompute(instance: &GeneralizedInstance) -> Result<FactorCache> {
    let (d1, d2, n) = (instance.d1(), instance.d2(), instance.n());
    let m1 = instance.m1().clone();
    let m2 = instance.m2().clone();
    if d1 == 0 || d2 == 0 {
        return Ok(FactorCache {
            kind: Kind::Dense { pinv: DMatrix::zeros(0, 0) },
            h: DMatrix::zeros(n, 0),
            hty: DVector::zeros(0),
            d1,
            d2,
            m1,
            m2,
        });
    }
    let full_rank = |s: &DVector<f64>, need: usize| {
        s.len() == need && s.iter().all(|x| x.is_finite()) && s.min() > MAP_RANK_FLOOR * s.max()
    };
    if m1.nrows() >= d1 && m2.ncols() >= d2 {
        let (p1, s1, e1) = thin_svd(&m1)?;
        let (p2, s2, e2) = thin_svd(&m2.transpose())?;
        if full_rank(&s1, d1) && full_rank(&s2, d2) {
            let mut g = DMatrix::zeros(n, d1 * d2);
            let e1t = e1.transpose();
            for i in 0..n {
                let mut gi = &e1t * instance.xt(i) * &e2;
                for b in 0..d2 {
                    for a in 0..d1 {
                        gi[(a, b)] /= s1[a] * s2[b];
                    }
                }
                g.row_mut(i).copy_from_slice(gi.as_slice());
            }
            let mut s = &g * g.transpose();
            for i in 0..n {
                s[(i, i)] += 1.0;
            }
            let chol =
                Cholesky::new(s).ok_or_else(|| Error::InvalidArgument("I + GGᵀ not positive definite".into()))?;
            let hty = g.tr_mul(instance.y());
            return Ok(FactorCache {
                kind: Kind::Whitened { p1, s1, e1, p2, s2, e2, chol },
                h: g,
                hty,
                d1,
                d2,
                m1,
                m2,
            });
        }
    }
    log::warn!("coefficient maps are rank deficient; using the dense pseudo-inverse B-update");
    let x = instance.design();
    let a = x.tr_mul(x) + kron(&(&m2 * m2.transpose()), &(m1.tr_mul(&m1)));
    let t = prox::svd(&a, false)?;
    let cut = 1e-12 * t.sigma.get(0).copied().unwrap_or(0.0);
    let mut pinv = DMatrix::zeros(a.ncols(), a.nrows());
    for (j, s) in t.sigma.iter().enumerate().filter(|(_, s)| **s > cut) {
        pinv += t.v.column(j) * t.u.column(j).transpose() / *s;
    }
    let hty = x.tr_mul(instance.y());
    Ok(FactorCache { kind: Kind::Dense { pinv }, h: x.clone(), hty, d1, d2, m1, m2 })
}

impl FactorCache {
    pub fn is_whitened(&self) -> bool {
        matches!(self.kind, Kind::Whitened { .. })
    }

    /// Shape of the splitting variable C in solver coordinates.
    fn c_shape(&self) -> (usize, usize) {
        match &self.kind {
            Kind::Whitened { .. } => (self.d1, self.d2),
            Kind::Dense { .. } => (self.m1.nrows(), self.m2.ncols()),
        }
    }

    fn dim(&self) -> usize {
        self.d1 * self.d2
    }

    /// Constraint map L(x): Z itself, or M1ΘM2.
    fn lmap(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.kind {
            Kind::Whitened { .. } => unvec(x.as_slice(), self.d1, self.d2),
            Kind::Dense { .. } => &self.m1 * unvec(x.as_slice(), self.d1, self.d2) * &self.m2,
        }
    }

    /// Adjoint Lᵀ(C).
    fn ladj(&self, c: &DMatrix<f64>) -> DVector<f64> {
        match &self.kind {
            Kind::Whitened { .. } => vec(c),
            Kind::Dense { .. } => vec(&(self.m1.transpose() * c * self.m2.transpose())),
        }
    }

    /// (HᵀH + LᵀL)⁻¹ r.
    fn normal_solve(&self, r: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            Kind::Whitened { chol, .. } => {
                let t = chol.solve(&(&self.h * r));
                r - self.h.tr_mul(&t)
            }
            Kind::Dense { pinv } => pinv * r,
        }
    }

    /// Coefficient Θ for solver variable x.
    pub fn coef(&self, x: &DVector<f64>) -> DMatrix<f64> {
        match &self.kind {
            Kind::Whitened { s1, e1, s2, e2, .. } => {
                let mut z = unvec(x.as_slice(), self.d1, self.d2);
                for b in 0..self.d2 {
                    for a in 0..self.d1 {
                        z[(a, b)] /= s1[a] * s2[b];
                    }
                }
                e1 * z * e2.transpose()
            }
            Kind::Dense { .. } => unvec(x.as_slice(), self.d1, self.d2),
        }
    }

    /// Solver variable x for coefficient Θ.
    pub fn solver_var(&self, coef: &DMatrix<f64>) -> DVector<f64> {
        match &self.kind {
            Kind::Whitened { s1, e1, s2, e2, .. } => {
                let mut z = e1.transpose() * coef * e2;
                for b in 0..self.d2 {
                    for a in 0..self.d1 {
                        z[(a, b)] *= s1[a] * s2[b];
                    }
                }
                vec(&z)
            }
            Kind::Dense { .. } => vec(coef),
        }
    }

    /// Lift a splitting-space matrix (C or D) to its p×q form.
    pub fn lift(&self, c: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.kind {
            Kind::Whitened { p1, p2, .. } => p1 * c * p2.transpose(),
            Kind::Dense { .. } => c.clone(),
        }
    }

    /// Inverse of [`FactorCache::lift`] on its range.
    pub fn project(&self, c: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.kind {
            Kind::Whitened { p1, p2, .. } => p1.transpose() * c * p2,
            Kind::Dense { .. } => c.clone(),
        }
    }
}

/// Solver state expressed in p×q terms, reusable across instances that
/// share the original problem (different λ or a different kept subspace).
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub b: DMatrix<f64>,
    pub theta: DVector<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal_loss: f64,
    pub primal_constraint: f64,
    pub dual: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal_loss.max(self.primal_constraint).max(self.dual)
    }
}

/// ADMM iterate in solver coordinates (see the module docs).
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub x: DVector<f64>,
    pub alpha: DVector<f64>,
    pub c: DMatrix<f64>,
    pub theta: DVector<f64>,
    pub d: DMatrix<f64>,
    pub iter: usize,
    pub history: Vec<Residuals>,
    hx: DVector<f64>,
    lx: DMatrix<f64>,
    rank: usize,
}

impl AdmmState {
    pub fn zeros(instance: &GeneralizedInstance, cache: &FactorCache) -> Self {
        let (a, b) = cache.c_shape();
        let n = instance.n();
        Self {
            x: DVector::zeros(cache.dim()),
            alpha: DVector::zeros(n),
            c: DMatrix::zeros(a, b),
            theta: DVector::zeros(n),
            d: DMatrix::zeros(a, b),
            iter: 0,
            history: Vec::new(),
            hx: DVector::zeros(n),
            lx: DMatrix::zeros(a, b),
            rank: 0,
        }
    }

    pub fn from_warm(instance: &GeneralizedInstance, cache: &FactorCache, warm: &WarmStart) -> Result<Self> {
        if warm.theta.len() != instance.n()
            || warm.b.shape() != (instance.p(), instance.q())
            || warm.c.shape() != warm.b.shape()
            || warm.d.shape() != warm.b.shape()
        {
            return Err(Error::Dimension("warm start does not match instance".into()));
        }
        let mut st = Self::zeros(instance, cache);
        if cache.dim() == 0 {
            return Ok(st);
        }
        st.x = cache.solver_var(&instance.unembed(&warm.b));
        st.hx = &cache.h * &st.x;
        st.lx = cache.lmap(&st.x);
        st.alpha = instance.y() - &st.hx;
        st.theta = warm.theta.clone();
        st.c = cache.project(&warm.c);
        st.d = cache.project(&warm.d);
        Ok(st)
    }

    /// Rank of the last C iterate.
    pub fn rank(&self) -> usize {
        self.rank
    }
}

/// Θ-update: σ(HᵀH + LᵀL)x = Lᵀ(D + σC) + Hᵀ(σy − θ − σα).
pub fn update_b(state: &mut AdmmState, cache: &FactorCache, sigma: f64) {
    let w = &state.theta + &state.alpha * sigma;
    let rhs = cache.ladj(&(&state.d + &state.c * sigma)) + &cache.hty * sigma - cache.h.tr_mul(&w);
    state.x = cache.normal_solve(&rhs) / sigma;
    state.hx = &cache.h * &state.x;
    state.lx = cache.lmap(&state.x);
}

/// α = (σy − θ − σ𝒳̃vec(Θ))/(1/n + σ).
pub fn update_alpha(state: &mut AdmmState, instance: &GeneralizedInstance, sigma: f64) {
    let n = instance.n() as f64;
    state.alpha = (instance.y() * sigma - &state.theta - &state.hx * sigma) / (1.0 / n + sigma);
}

/// C = prox_{(λ/σ)‖·‖_*}(M1ΘM2 − D/σ).
pub fn update_c(state: &mut AdmmState, instance: &GeneralizedInstance, sigma: f64) -> Result<()> {
    let arg = &state.lx - &state.d / sigma;
    let (c, rank) = prox::prox_nuclear_ranked(&arg, instance.lambda() / sigma)?;
    state.c = c;
    state.rank = rank;
    Ok(())
}

/// θ ← θ − τσ(y − 𝒳̃vec(Θ) − α), D ← D − τσ(M1ΘM2 − C).
pub fn update_duals(state: &mut AdmmState, instance: &GeneralizedInstance, sigma: f64, tau: f64) {
    let r1 = instance.y() - &state.hx - &state.alpha;
    let r2 = &state.lx - &state.c;
    state.theta -= r1 * (tau * sigma);
    state.d -= r2 * (tau * sigma);
}

/// Result of one ADMM solve.
#[derive(Debug, Clone)]
pub struct Solution {
    /// Solution mapped to p×q (through the embedding, if any).
    pub b: DMatrix<f64>,
    /// Coefficient Θ in instance coordinates.
    pub coef: DMatrix<f64>,
    /// ADMM multiplier for y − 𝒳̃vec(Θ) − α = 0.
    pub theta: DVector<f64>,
    pub objective: f64,
    pub iters: usize,
    pub converged: bool,
    pub solve_time_ms: f64,
    pub rank: usize,
    pub residuals: Residuals,
    pub state: AdmmState,
    pub warm: WarmStart,
}

pub fn solve(instance: &GeneralizedInstance, config: &AdmmConfig, warm: Option<&WarmStart>) -> Result<Solution> {
    let start = Instant::now();
    let cache = precompute(instance)?;
    let mut sol = solve_with_cache(instance, &cache, config, warm)?;
    sol.solve_time_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(sol)
}

pub fn solve_with_cache(
    instance: &GeneralizedInstance,
    cache: &FactorCache,
    config: &AdmmConfig,
    warm: Option<&WarmStart>,
) -> Result<Solution> {
    config.validate()?;
    let start = Instant::now();
    if cache.dim() != instance.d1() * instance.d2() {
        return Err(Error::Dimension("factor cache does not match instance".into()));
    }
    let sigma = config.sigma(instance.lambda(), instance.y().norm() / (instance.n() as f64).sqrt());
    let mut state = match warm {
        Some(w) => AdmmState::from_warm(instance, cache, w)?,
        None => AdmmState::zeros(instance, cache),
    };
    if cache.dim() == 0 {
        let coef = DMatrix::zeros(instance.d1(), instance.d2());
        let r = Residuals { primal_loss: 0.0, primal_constraint: 0.0, dual: 0.0 };
        let (p, q) = (instance.p(), instance.q());
        let theta = -instance.y() / instance.n() as f64;
        return Ok(Solution {
            warm: WarmStart {
                b: DMatrix::zeros(p, q),
                theta: theta.clone(),
                c: DMatrix::zeros(p, q),
                d: DMatrix::zeros(p, q),
            },
            b: instance.embed(&coef),
            objective: instance.objective(&coef),
            coef,
            theta,
            iters: 0,
            converged: true,
            solve_time_ms: start.elapsed().as_secs_f64() * 1e3,
            rank: 0,
            residuals: r,
            state,
        });
    }
    let ynorm = instance.y().norm();
    let mut best: Option<(f64, DVector<f64>, usize, Residuals)> = None;
    let mut converged = false;
    let mut last = Residuals { primal_loss: f64::INFINITY, primal_constraint: f64::INFINITY, dual: f64::INFINITY };
    for _ in 0..config.max_iter {
        let alpha_prev = state.alpha.clone();
        let c_prev = state.c.clone();
        update_b(&mut state, cache, sigma);
        update_alpha(&mut state, instance, sigma);
        update_c(&mut state, instance, sigma)?;
        update_duals(&mut state, instance, sigma, config.tau);
        state.iter += 1;

        let r1 = (instance.y() - &state.hx - &state.alpha).norm() / (1.0 + ynorm);
        let r2 = (&state.lx - &state.c).norm() / (1.0 + state.c.norm());
        let ds = cache.h.tr_mul(&(&state.alpha - &alpha_prev)) - cache.ladj(&(&state.c - &c_prev));
        let scale = 1.0 + cache.h.tr_mul(&state.theta).norm() + cache.ladj(&state.d).norm();
        last = Residuals { primal_loss: r1, primal_constraint: r2, dual: sigma * ds.norm() / scale };
        state.history.push(last);
        if !last.max().is_finite() {
            return Err(Error::NonFinite(format!("ADMM iterate {}", state.iter)));
        }
        if r1.max(r2) <= config.tol_primal && last.dual <= config.tol_dual {
            converged = true;
            break;
        }
        let m = last.max();
        if best.as_ref().is_none_or(|b| m < b.0) {
            best = Some((m, state.x.clone(), state.rank, last));
        }
    }
    let (x, rank, residuals) = if converged {
        (state.x.clone(), state.rank, last)
    } else {
        log::warn!("ADMM stopped at max_iter={} (residual {:.3e})", config.max_iter, last.max());
        let (_, x, r, res) = best.expect("at least one iteration");
        (x, r, res)
    };
    let coef = cache.coef(&x);
    let b = instance.embed(&coef);
    let warm = WarmStart {
        b: instance.embed(&cache.coef(&state.x)),
        theta: state.theta.clone(),
        c: cache.lift(&state.c),
        d: cache.lift(&state.d),
    };
    Ok(Solution {
        warm,
        b,
        objective: instance.objective(&coef),
        coef,
        theta: state.theta.clone(),
        iters: state.iter,
        converged,
        solve_time_ms: start.elapsed().as_secs_f64() * 1e3,
        rank,
        residuals,
        state,
    })
}
