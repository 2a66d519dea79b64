#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use tracescreen::model::{build_problem, TraceRegressionProblem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

pub fn gauss_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Haar-ish orthogonal matrix from the QR of a Gaussian matrix.
pub fn orthogonal(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
    gauss(rng, k, k).qr().q()
}

/// Entrywise Gaussian Xᵢ, rank-one truth plus small noise.
pub fn random_problem(p: usize, q: usize, n: usize, seed: u64) -> TraceRegressionProblem {
    let mut r = rng(seed);
    let truth = gauss(&mut r, p, 1) * gauss(&mut r, q, 1).transpose();
    let xs: Vec<DMatrix<f64>> = (0..n).map(|_| gauss(&mut r, p, q)).collect();
    let y = DVector::from_fn(n, |i, _| xs[i].dot(&truth) + 0.1 * r.sample::<f64, _>(StandardNormal));
    build_problem(xs, y).unwrap()
}

/// Like [`random_problem`], but every Xᵢ has a zero last row and last column.
pub fn masked_problem(p: usize, q: usize, n: usize, seed: u64) -> TraceRegressionProblem {
    let mut r = rng(seed);
    let mut truth = gauss(&mut r, p, 1) * gauss(&mut r, q, 1).transpose();
    truth.row_mut(p - 1).fill(0.0);
    truth.column_mut(q - 1).fill(0.0);
    let xs: Vec<DMatrix<f64>> = (0..n)
        .map(|_| {
            let mut x = gauss(&mut r, p, q);
            x.row_mut(p - 1).fill(0.0);
            x.column_mut(q - 1).fill(0.0);
            x
        })
        .collect();
    let y = DVector::from_fn(n, |i, _| xs[i].dot(&truth) + 0.1 * r.sample::<f64, _>(StandardNormal));
    build_problem(xs, y).unwrap()
}

pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let d = (a - b).norm();
    if d == 0.0 {
        0.0
    } else {
        d / a.norm().max(b.norm())
    }
}
