//! Singular-value calculus: SVD with full bases, the nuclear-norm prox,
//! dual feasibility and subdifferential membership checks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{TraceRegressionProblem, WeightPair};

/// Thin SVD `U diag(sigma) Vᵀ` with optional full orthogonal bases.
#[derive(Debug, Clone)]
pub struct SvdTriple {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
    pub u_full: Option<DMatrix<f64>>,
    pub v_full: Option<DMatrix<f64>>,
}

impl SvdTriple {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

/// Singular values of `m` (min(p,q) of them) with left/right vectors, sorted
/// nonincreasing. Vectors for zero singular values are still orthonormal.
fn sorted_svd(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let (p, q) = m.shape();
    let k = p.min(q);
    if k == 0 {
        return Ok((DMatrix::zeros(p, 0), DVector::zeros(0), DMatrix::zeros(q, 0)));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("svd input".into()));
    }
    let f = faer::Mat::<f64>::from_fn(p, q, |i, j| m[(i, j)]);
    let d = f.thin_svd().map_err(|_| Error::SvdFailed { rows: p, cols: q, max_abs: m.amax() })?;
    let (fu, fv, fs) = (d.U(), d.V(), d.S().column_vector());
    let u = DMatrix::from_fn(p, k, |i, j| fu[(i, j)]);
    let v = DMatrix::from_fn(q, k, |i, j| fv[(i, j)]);
    let s = DVector::from_fn(k, |i, _| fs[i]);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let mut us = DMatrix::zeros(p, k);
    let mut vs = DMatrix::zeros(q, k);
    let mut ss = DVector::zeros(k);
    for (dst, &src) in order.iter().enumerate() {
        us.set_column(dst, &u.column(src));
        vs.set_column(dst, &v.column(src));
        ss[dst] = s[src];
    }
    Ok((us, ss, vs))
}

/// Extend the orthonormal columns of `q` to an orthonormal basis of ℝⁿ.
pub fn complete_basis(q: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = q.shape();
    let mut out = DMatrix::zeros(n, n);
    out.columns_mut(0, k).copy_from(q);
    for col in k..n {
        let basis = out.columns(0, col);
        let mut best: Option<DVector<f64>> = None;
        let mut best_norm = -1.0;
        for e in 0..n {
            let mut v = DVector::zeros(n);
            v[e] = 1.0;
            for _ in 0..2 {
                let coef = basis.transpose() * &v;
                v -= &basis * coef;
            }
            let nv = v.norm();
            if nv > best_norm {
                best_norm = nv;
                best = Some(v);
            }
            if nv > 0.7 {
                break;
            }
        }
        let v = best.expect("n > col");
        out.set_column(col, &(v / best_norm));
    }
    out
}

/// SVD of `m`. The thin factors keep singular values above
/// `max(p,q)·ε·σ₁`; `full` adds orthogonal completions.
pub fn svd(m: &DMatrix<f64>, full: bool) -> Result<SvdTriple> {
    let (p, q) = m.shape();
    let (u, s, v) = sorted_svd(m)?;
    let tol = (p.max(q) as f64) * f64::EPSILON * s.get(0).copied().unwrap_or(0.0);
    let r = s.iter().take_while(|&&x| x > tol && x > 0.0).count();
    let (u, v) = (u.columns(0, r).into_owned(), v.columns(0, r).into_owned());
    let (u_full, v_full) = if full { (Some(complete_basis(&u)), Some(complete_basis(&v))) } else { (None, None) };
    Ok(SvdTriple { u, sigma: s.rows(0, r).into_owned(), v, u_full, v_full })
}

pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(0);
    }
    match sorted_svd(m) {
        Ok((_, s, _)) => s,
        Err(_) => {
            let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
            s.sort_by(|a, b| b.total_cmp(a));
            DVector::from_vec(s)
        }
    }
}

pub fn nuclear_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).sum()
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).get(0).copied().unwrap_or(0.0)
}

/// `prox_{t‖·‖_*}(m)` together with the rank of the result.
pub fn prox_nuclear_ranked(m: &DMatrix<f64>, t: f64) -> Result<(DMatrix<f64>, usize)> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("prox threshold must be >= 0, got {t}")));
    }
    let (p, q) = m.shape();
    let (u, s, v) = sorted_svd(m)?;
    let r = s.iter().take_while(|&&x| x > t).count();
    if r == 0 {
        return Ok((DMatrix::zeros(p, q), 0));
    }
    let mut us = u.columns(0, r).into_owned();
    for j in 0..r {
        us.column_mut(j).scale_mut(s[j] - t);
    }
    Ok((us * v.columns(0, r).transpose(), r))
}

pub fn prox_nuclear(m: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    prox_nuclear_ranked(m, t).map(|(x, _)| x)
}

/// ‖W₁⁻¹(Σθᵢ Xᵢ)W₂⁻¹‖₂; θ is dual feasible iff this is at most 1.
pub fn dual_feasibility_gauge(theta: &DVector<f64>, problem: &TraceRegressionProblem, weights: &WeightPair) -> f64 {
    let s = problem.weighted_sum(theta);
    spectral_norm(&(&weights.w1inv * s * &weights.w2inv))
}

/// Distance-to-membership of `g` in ∂‖W₁BW₂‖_*, with thin rank of W₁BW₂
/// decided by singular values above `rank_tol·σ₁`.
pub fn subdifferential_residual_tol(
    b: &DMatrix<f64>,
    g: &DMatrix<f64>,
    weights: &WeightPair,
    rank_tol: f64,
) -> Result<f64> {
    let m = &weights.w1 * b * &weights.w2;
    let (u, s, v) = sorted_svd(&m)?;
    let cut = rank_tol * s.get(0).copied().unwrap_or(0.0);
    let r = s.iter().take_while(|&&x| x > cut && x > 0.0).count();
    let ur = u.columns(0, r);
    let vr = v.columns(0, r);
    let n = &weights.w1inv * g * &weights.w2inv - &ur * vr.transpose();
    let a = (ur.transpose() * &n).norm();
    let c = (&n * vr).norm();
    let d = (spectral_norm(&n) - 1.0).max(0.0);
    Ok(a.max(c).max(d))
}

pub fn subdifferential_residual(b: &DMatrix<f64>, g: &DMatrix<f64>, weights: &WeightPair) -> Result<f64> {
    subdifferential_residual_tol(b, g, weights, 1e-10)
}
