//! Synthetic data: low-rank Gaussian trace regression and binary shapes.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_problem, TraceRegressionProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub p: usize,
    pub q: usize,
    pub n: usize,
    pub rank: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl GaussianSpec {
    pub fn new(p: usize, q: usize, n: usize, seed: u64) -> Self {
        Self { p, q, n, rank: 2, noise_std: 0.1, seed }
    }
}

fn normal_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

/// yᵢ = ⟨PᵢQᵢᵀ, B*⟩ + εᵢ with Gaussian Pᵢ, Qᵢ and a unit-Frobenius rank-r B*.
pub fn gen_gaussian(spec: &GaussianSpec) -> Result<(TraceRegressionProblem, DMatrix<f64>)> {
    let GaussianSpec { p, q, n, rank, noise_std, seed } = *spec;
    if rank > p.min(q) {
        return Err(Error::InvalidArgument(format!("rank {rank} exceeds min(p,q)")));
    }
    if !(noise_std >= 0.0) {
        return Err(Error::InvalidArgument("noise_std must be nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = normal_matrix(&mut rng, p, rank) * normal_matrix(&mut rng, q, rank).transpose();
    let nb = b.norm();
    if nb > 0.0 {
        b /= nb;
    }
    let mut xs = Vec::with_capacity(n);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let pi = normal_matrix(&mut rng, p, 1);
        let qi = normal_matrix(&mut rng, q, 1);
        let x = &pi * qi.transpose();
        let eps: f64 = StandardNormal.sample(&mut rng);
        y[i] = x.dot(&b) + noise_std * eps;
        xs.push(x);
    }
    Ok((build_problem(xs, y)?, b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Cross,
    Square,
    Tee,
    Ell,
    Ring,
    Bars,
    Checker,
    Frame,
    Diag,
    DotGrid,
}

impl Shape {
    pub const ALL: [Shape; 10] = [
        Shape::Cross,
        Shape::Square,
        Shape::Tee,
        Shape::Ell,
        Shape::Ring,
        Shape::Bars,
        Shape::Checker,
        Shape::Frame,
        Shape::Diag,
        Shape::DotGrid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Cross => "cross",
            Shape::Square => "square",
            Shape::Tee => "tee",
            Shape::Ell => "ell",
            Shape::Ring => "ring",
            Shape::Bars => "bars",
            Shape::Checker => "checker",
            Shape::Frame => "frame",
            Shape::Diag => "diag",
            Shape::DotGrid => "dot-grid",
        }
    }

    /// Rank of the 64×64 bitmap.
    pub fn documented_rank(self) -> usize {
        match self {
            Shape::Square | Shape::Bars | Shape::DotGrid => 1,
            Shape::Diag => 63,
            _ => 2,
        }
    }

    /// Binary `size×size` bitmap; features scale with `size/8`.
    pub fn matrix(self, size: usize) -> DMatrix<f64> {
        let u = (size / 8).max(1);
        let band = |x: usize, lo: usize, hi: usize| x >= lo && x < hi;
        let border = (u / 2).max(1);
        DMatrix::from_fn(size, size, |r, c| {
            let on = match self {
                Shape::Cross => band(r, 3 * u, 5 * u) || band(c, 3 * u, 5 * u),
                Shape::Square => band(r, 2 * u, 6 * u) && band(c, 2 * u, 6 * u),
                Shape::Tee => {
                    (band(r, u, 2 * u) && band(c, u, 7 * u)) || (band(r, 2 * u, 7 * u) && band(c, 3 * u, 5 * u))
                }
                Shape::Ell => (band(r, u, 7 * u) && band(c, u, 2 * u)) || (band(r, 6 * u, 7 * u) && band(c, u, 7 * u)),
                Shape::Ring => {
                    band(r, u, 7 * u) && band(c, u, 7 * u) && !(band(r, 2 * u, 6 * u) && band(c, 2 * u, 6 * u))
                }
                Shape::Bars => band(r, u, 7 * u) && (c / u) % 2 == 0,
                Shape::Checker => (r / u + c / u) % 2 == 0,
                Shape::Frame => !(band(r, border, size - border) && band(c, border, size - border)),
                Shape::Diag => r.abs_diff(c) <= u / 4,
                Shape::DotGrid => r % u < 2 && c % u < 2,
            };
            if on {
                1.0
            } else {
                0.0
            }
        })
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Shape::ALL.iter().copied().find(|x| x.name() == s).ok_or_else(|| Error::UnknownShape(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub shape: Shape,
    pub size: usize,
    pub n: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl ShapeSpec {
    pub fn new(shape: Shape, n: usize, seed: u64) -> Self {
        Self { shape, size: 64, n, noise_std: 0.1, seed }
    }
}

/// yᵢ = ⟨Xᵢ, B⟩ + εᵢ with entrywise Gaussian Xᵢ and a binary shape B.
pub fn gen_shape(spec: &ShapeSpec) -> Result<(TraceRegressionProblem, DMatrix<f64>)> {
    if spec.size == 0 {
        return Err(Error::InvalidArgument("shape size must be positive".into()));
    }
    let b = spec.shape.matrix(spec.size);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut xs = Vec::with_capacity(spec.n);
    let mut y = DVector::zeros(spec.n);
    for i in 0..spec.n {
        let x = normal_matrix(&mut rng, spec.size, spec.size);
        let eps: f64 = StandardNormal.sample(&mut rng);
        y[i] = x.dot(&b) + spec.noise_std * eps;
        xs.push(x);
    }
    Ok((build_problem(xs, y)?, b))
}
