//! Problem representation, stacked-design algebra, the least-squares
//! estimate, adaptive weights and λ_max.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::prox;

/// Column-stacking vectorization.
pub fn vec(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`] for a `p×q` target.
pub fn unvec(v: &[f64], p: usize, q: usize) -> DMatrix<f64> {
    assert_eq!(v.len(), p * q, "unvec length");
    DMatrix::from_column_slice(p, q, v)
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            out.view_mut((i * br, j * bc), (br, bc)).copy_from(&(b * a[(i, j)]));
        }
    }
    out
}

#[derive(Debug)]
struct ProblemData {
    x: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    design: DMatrix<f64>,
    rank_warning: Option<String>,
}

/// Trace regression data `yᵢ = ⟨Xᵢ, B⟩ + εᵢ`. Cloning is cheap.
#[derive(Debug, Clone)]
pub struct TraceRegressionProblem {
    n: usize,
    p: usize,
    q: usize,
    data: Arc<ProblemData>,
}

/// Smallest/largest singular value ratio below which 𝒳 is treated as
/// rank deficient.
pub const ROW_RANK_FLOOR: f64 = 1e-10;

pub fn build_problem(x: Vec<DMatrix<f64>>, y: DVector<f64>) -> Result<TraceRegressionProblem> {
    let n = x.len();
    if n == 0 {
        return Err(Error::Dimension("at least one design matrix required".into()));
    }
    if y.len() != n {
        return Err(Error::Dimension(format!("{} design matrices but {} responses", n, y.len())));
    }
    let (p, q) = x[0].shape();
    if p == 0 || q == 0 {
        return Err(Error::Dimension("design matrices must be nonempty".into()));
    }
    for (i, xi) in x.iter().enumerate() {
        if xi.shape() != (p, q) {
            return Err(Error::Dimension(format!("X[{i}] is {}x{}, expected {p}x{q}", xi.nrows(), xi.ncols())));
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("X[{i}]")));
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("y".into()));
    }
    let mut design = DMatrix::zeros(n, p * q);
    for (i, xi) in x.iter().enumerate() {
        design.row_mut(i).copy_from_slice(xi.as_slice());
    }
    let s = prox::singular_values(&design);
    let smax = s.get(0).copied().unwrap_or(0.0);
    let smin = if n <= p * q { s[n - 1] } else { 0.0 };
    let rank_warning = if n > p * q || !(smin > ROW_RANK_FLOOR * smax) {
        let msg = format!(
            "stacked design is not of full row rank (n={n}, pq={}, smin/smax={:.3e}); screening disabled",
            p * q,
            if smax > 0.0 { smin / smax } else { 0.0 }
        );
        log::warn!("{msg}");
        Some(msg)
    } else {
        None
    };
    Ok(TraceRegressionProblem { n, p, q, data: Arc::new(ProblemData { x, y, design, rank_warning }) })
}

impl TraceRegressionProblem {
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn q(&self) -> usize {
        self.q
    }
    pub fn x(&self) -> &[DMatrix<f64>] {
        &self.data.x
    }
    pub fn y(&self) -> &DVector<f64> {
        &self.data.y
    }
    /// The n×pq matrix with row i equal to vec(Xᵢ).
    pub fn design(&self) -> &DMatrix<f64> {
        &self.data.design
    }
    pub fn full_row_rank(&self) -> bool {
        self.data.rank_warning.is_none()
    }
    pub fn rank_warning(&self) -> Option<&str> {
        self.data.rank_warning.as_deref()
    }

    /// Σ θᵢ Xᵢ.
    pub fn weighted_sum(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let v = self.design().tr_mul(theta);
        unvec(v.as_slice(), self.p, self.q)
    }

    /// (⟨X₁,B⟩, …, ⟨Xₙ,B⟩).
    pub fn apply(&self, b: &DMatrix<f64>) -> DVector<f64> {
        self.design() * vec(b)
    }

    pub fn loss(&self, b: &DMatrix<f64>) -> f64 {
        (self.y() - self.apply(b)).norm_squared() / (2.0 * self.n as f64)
    }

    /// Objective of the adaptive nuclear-norm problem at `b`.
    pub fn objective(&self, weights: &WeightPair, b: &DMatrix<f64>, lambda: f64) -> f64 {
        self.loss(b) + lambda * weights.penalty(b)
    }

    /// Dual point from the KKT relation, (𝒳vec(B) − y)/(nλ).
    pub fn kkt_dual(&self, b: &DMatrix<f64>, lambda: f64) -> DVector<f64> {
        (self.apply(b) - self.y()) / (self.n as f64 * lambda)
    }
}

/// Cholesky factor of 𝒳𝒳ᵀ shared by least squares and screening.
#[derive(Debug, Clone)]
pub struct GramFactor {
    gram: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl GramFactor {
    pub fn new(problem: &TraceRegressionProblem) -> Result<Self> {
        let d = problem.design();
        let gram = d * d.transpose();
        let chol = Cholesky::new(gram.clone()).ok_or_else(|| {
            let e = gram.clone().symmetric_eigenvalues();
            let (lo, hi) = (e.min(), e.max());
            Error::SingularGram { cond: if lo > 0.0 { hi / lo } else { f64::INFINITY } }
        })?;
        Ok(Self { gram, chol })
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn solve(&self, z: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(z)
    }

    pub fn solve_mat(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(z)
    }

    /// 𝒳ᵀ(𝒳𝒳ᵀ)⁻¹z.
    pub fn row_space_map(&self, problem: &TraceRegressionProblem, z: &DVector<f64>) -> DVector<f64> {
        problem.design().tr_mul(&self.solve(z))
    }
}

/// Minimum-norm interpolant with vec(B_LS) = 𝒳ᵀ(𝒳𝒳ᵀ)⁻¹y.
pub fn min_norm_least_squares(problem: &TraceRegressionProblem, gram: &GramFactor) -> DMatrix<f64> {
    let v = gram.row_space_map(problem, problem.y());
    unvec(v.as_slice(), problem.p(), problem.q())
}

/// Adaptive weights W₁ = U Diag(s_p)^{−γ} Uᵀ, W₂ = V Diag(s_q)^{−γ} Vᵀ.
#[derive(Debug, Clone)]
pub struct WeightPair {
    pub w1: DMatrix<f64>,
    pub w2: DMatrix<f64>,
    pub w1inv: DMatrix<f64>,
    pub w2inv: DMatrix<f64>,
    pub gamma: f64,
    /// Padded (and floored) singular values of B_LS, lengths p and q.
    pub s_p: DVector<f64>,
    pub s_q: DVector<f64>,
    /// How many padded singular values were raised to the floor.
    pub floored: usize,
}

/// Relative singular-value floor (multiplied by n^{−1/2}).
pub const WEIGHT_FLOOR: f64 = 1e-8;

impl WeightPair {
    pub fn identity(p: usize, q: usize) -> Self {
        Self {
            w1: DMatrix::identity(p, p),
            w2: DMatrix::identity(q, q),
            w1inv: DMatrix::identity(p, p),
            w2inv: DMatrix::identity(q, q),
            gamma: 1.0,
            s_p: DVector::from_element(p, 1.0),
            s_q: DVector::from_element(q, 1.0),
            floored: 0,
        }
    }

    /// ‖W₁BW₂‖_*.
    pub fn penalty(&self, b: &DMatrix<f64>) -> f64 {
        prox::nuclear_norm(&(&self.w1 * b * &self.w2))
    }
}

fn spectral(basis: &DMatrix<f64>, diag: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = basis.clone();
    for (j, d) in diag.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*d);
    }
    let m = scaled * basis.transpose();
    (&m + m.transpose()) * 0.5
}

pub fn compute_weights(b_ls: &DMatrix<f64>, gamma: f64, n: usize) -> Result<WeightPair> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidArgument(format!("gamma must lie in (0,1], got {gamma}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let (p, q) = b_ls.shape();
    let t = prox::svd(b_ls, true)?;
    let (u, v) = (t.u_full.expect("full"), t.v_full.expect("full"));
    let raw = prox::singular_values(b_ls);
    let pad = (n as f64).powf(-0.5);
    let floor = pad * WEIGHT_FLOOR;
    let mut floored = 0;
    let mut padded = |len: usize| {
        DVector::from_fn(len, |i, _| {
            let s = raw.get(i).copied().unwrap_or(pad);
            if s < floor {
                floored += 1;
                floor
            } else {
                s
            }
        })
    };
    let s_p = padded(p);
    let s_q = padded(q);
    if floored > 0 {
        log::warn!("{floored} singular values of the least-squares estimate raised to the floor {floor:.3e}");
    }
    let w1 = spectral(&u, &s_p.map(|s| s.powf(-gamma)));
    let w2 = spectral(&v, &s_q.map(|s| s.powf(-gamma)));
    let w1inv = spectral(&u, &s_p.map(|s| s.powf(gamma)));
    let w2inv = spectral(&v, &s_q.map(|s| s.powf(gamma)));
    Ok(WeightPair { w1, w2, w1inv, w2inv, gamma, s_p, s_q, floored })
}

/// ‖W₁⁻¹(Σ yᵢXᵢ)W₂⁻¹‖₂ / n.
pub fn lambda_max(problem: &TraceRegressionProblem, weights: &WeightPair) -> f64 {
    let s = problem.weighted_sum(problem.y());
    prox::spectral_norm(&(&weights.w1inv * s * &weights.w2inv)) / problem.n() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stacking_examples() {
        let p = build_problem(vec![DMatrix::identity(2, 2)], DVector::from_element(1, 3.0)).unwrap();
        assert_eq!(p.design().row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0, 0.0, 1.0]);
        let mut e21 = DMatrix::zeros(2, 2);
        e21[(1, 0)] = 1.0;
        let p = build_problem(vec![e21], DVector::zeros(1)).unwrap();
        assert_eq!(p.design().row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn build_rejects_bad_input() {
        let x = vec![DMatrix::zeros(2, 2), DMatrix::zeros(2, 3)];
        assert!(matches!(build_problem(x, DVector::zeros(2)), Err(Error::Dimension(_))));
        assert!(build_problem(vec![DMatrix::zeros(2, 2)], DVector::zeros(2)).is_err());
        let mut bad = DMatrix::zeros(2, 2);
        bad[(0, 1)] = f64::NAN;
        assert!(matches!(build_problem(vec![bad], DVector::zeros(1)), Err(Error::NonFinite(_))));
    }

    #[test]
    fn rank_deficient_design_warns() {
        let x = vec![DMatrix::identity(2, 2), DMatrix::identity(2, 2)];
        let p = build_problem(x, DVector::zeros(2)).unwrap();
        assert!(!p.full_row_rank());
    }

    #[test]
    fn single_sample_least_squares() {
        let p = build_problem(vec![DMatrix::identity(2, 2)], DVector::from_element(1, 2.0)).unwrap();
        let g = GramFactor::new(&p).unwrap();
        let b = min_norm_least_squares(&p, &g);
        assert!((b - DMatrix::<f64>::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn weight_examples() {
        let w = compute_weights(&DMatrix::identity(3, 3), 1.0, 7).unwrap();
        assert!((&w.w1 - DMatrix::<f64>::identity(3, 3)).norm() < 1e-14);
        assert!((&w.w2 - DMatrix::<f64>::identity(3, 3)).norm() < 1e-14);

        let w = compute_weights(&DMatrix::from_element(1, 1, 4.0), 0.5, 4).unwrap();
        assert!((w.w1[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((w.w2[(0, 0)] - 0.5).abs() < 1e-15);

        let mut b = DMatrix::zeros(2, 3);
        b[(0, 0)] = 4.0;
        b[(1, 1)] = 1.0;
        let w = compute_weights(&b, 1.0, 25).unwrap();
        assert!((&w.w1 - DMatrix::from_diagonal(&DVector::from_vec(vec![0.25, 1.0]))).norm() < 1e-14);
        assert!((&w.w2 - DMatrix::from_diagonal(&DVector::from_vec(vec![0.25, 1.0, 5.0]))).norm() < 1e-13);
        assert_eq!(w.s_q.as_slice(), &[4.0, 1.0, 0.2]);
    }

    #[test]
    fn rank_deficient_estimate_is_floored() {
        let mut b = DMatrix::zeros(3, 3);
        b[(0, 0)] = 1.0;
        let w = compute_weights(&b, 1.0, 4).unwrap();
        assert_eq!(w.floored, 4);
        assert!(w.s_p.iter().all(|&s| s > 0.0));
        let prod = &w.w1 * &w.w1inv;
        assert!((prod - DMatrix::<f64>::identity(3, 3)).norm() < 1e-8);
    }

    #[test]
    fn gamma_out_of_range() {
        assert!(compute_weights(&DMatrix::identity(2, 2), 0.0, 3).is_err());
        assert!(compute_weights(&DMatrix::identity(2, 2), 1.5, 3).is_err());
    }

    #[test]
    fn lambda_max_zero_response() {
        let p = build_problem(vec![DMatrix::identity(2, 2)], DVector::zeros(1)).unwrap();
        assert_eq!(lambda_max(&p, &WeightPair::identity(2, 2)), 0.0);
    }

    #[test]
    fn kron_small() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let k = kron(&a, &b);
        assert_eq!(k, DMatrix::from_row_slice(2, 4, &[0.0, 1.0, 0.0, 2.0, 0.0, 3.0, 0.0, 4.0]));
    }
}
