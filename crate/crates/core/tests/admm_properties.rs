mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use tracescreen::admm::{
    precompute, solve, update_b, AdmmConfig, AdmmState, FactorCache, GeneralizedInstance, Penalty, GOLDEN,
};
use tracescreen::model::{compute_weights, kron, min_norm_least_squares, vec, GramFactor};

/// σ(𝒳̃ᵀ𝒳̃ + M2M2ᵀ ⊗ M1ᵀM1)vecΘ − vec(M1ᵀ(D+σC)M2ᵀ) − 𝒳̃ᵀ(σy − θ − σα), relative.
fn dense_stationarity(inst: &GeneralizedInstance, cache: &FactorCache, st: &AdmmState, sigma: f64) -> f64 {
    let (m1, m2) = (inst.m1(), inst.m2());
    let h = inst.design();
    let a = h.tr_mul(h) + kron(&(m2 * m2.transpose()), &(m1.transpose() * m1));
    let theta = cache.coef(&st.x);
    let lhs = a * vec(&theta) * sigma;
    let c = cache.lift(&st.c);
    let d = cache.lift(&st.d);
    let rhs = vec(&(m1.transpose() * (d + c * sigma) * m2.transpose()))
        + h.tr_mul(&(inst.y() * sigma - &st.theta - &st.alpha * sigma));
    (&lhs - &rhs).norm() / (1.0 + rhs.norm())
}

fn randomize(st: &mut AdmmState, seed: u64) {
    let mut g = common::rng(seed);
    let (a, b) = st.c.shape();
    st.alpha = common::gauss_vec(&mut g, st.alpha.len());
    st.theta = common::gauss_vec(&mut g, st.theta.len());
    st.c = common::gauss(&mut g, a, b);
    st.d = common::gauss(&mut g, a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn b_update_solves_dense_normal_equations(
        (d1, d2, p, q) in (1usize..5, 1usize..5, 1usize..6, 1usize..6),
        n in 1usize..12,
        sigma in 0.05f64..5.0,
        seed in any::<u64>(),
    ) {
        prop_assume!(p >= d1 && q >= d2);
        let mut g = common::rng(seed);
        let design = common::gauss(&mut g, n, d1 * d2);
        let y = common::gauss_vec(&mut g, n);
        let m1 = common::gauss(&mut g, p, d1);
        let m2 = common::gauss(&mut g, d2, q);
        let inst = GeneralizedInstance::new(design, d1, d2, y, m1, m2, 0.3).unwrap();
        let cache = precompute(&inst).unwrap();
        prop_assume!(cache.is_whitened());
        let mut st = AdmmState::zeros(&inst, &cache);
        randomize(&mut st, seed ^ 1);
        update_b(&mut st, &cache, sigma);
        prop_assert!(dense_stationarity(&inst, &cache, &st, sigma) <= 1e-9);
    }

    #[test]
    fn rotated_instance_gives_the_same_solution(
        (p, q) in (1usize..5, 1usize..5),
        extra in 0usize..4,
        frac in 0.1f64..0.9,
        seed in any::<u64>(),
    ) {
        let n = (p * q).min(p.max(q) + extra).max(1);
        let prob = common::random_problem(p, q, n, seed);
        prop_assume!(prob.full_row_rank());
        let gram = GramFactor::new(&prob).unwrap();
        let w = compute_weights(&min_norm_least_squares(&prob, &gram), 1.0, n).unwrap();
        let lmax = tracescreen::model::lambda_max(&prob, &w);
        let lambda = frac * lmax;
        let cfg = AdmmConfig { max_iter: 20_000, ..AdmmConfig::default() }.with_tol(1e-10);
        let plain = solve(&GeneralizedInstance::from_problem(&prob, &w, lambda).unwrap(), &cfg, None).unwrap();

        let mut g = common::rng(seed ^ 7);
        let u = common::orthogonal(&mut g, p);
        let v = common::orthogonal(&mut g, q);
        let mut design = DMatrix::zeros(n, p * q);
        for (i, x) in prob.x().iter().enumerate() {
            design.row_mut(i).copy_from_slice((u.transpose() * x * &v).as_slice());
        }
        let rot = GeneralizedInstance::new(design, p, q, prob.y().clone(), &w.w1 * &u, v.transpose() * &w.w2, lambda)
            .unwrap()
            .with_embedding(u, v)
            .unwrap();
        let turned = solve(&rot, &cfg, None).unwrap();
        prop_assert_eq!(plain.converged, turned.converged);
        let scale = 1.0 + plain.b.norm();
        prop_assert!((&plain.b - &turned.b).norm() <= 1e-6 * scale);
        prop_assert!((plain.objective - turned.objective).abs() <= 1e-9 * plain.objective.abs().max(1.0));
    }
}

#[test]
fn b_update_dense_fallback_solves_dense_normal_equations() {
    let mut g = common::rng(3);
    let (d1, d2, n) = (3, 2, 9);
    let design = common::gauss(&mut g, n, d1 * d2);
    let y = common::gauss_vec(&mut g, n);
    let mut m1 = common::gauss(&mut g, 4, d1);
    m1.column_mut(1).fill(0.0);
    let m2 = common::gauss(&mut g, d2, 3);
    let inst = GeneralizedInstance::new(design, d1, d2, y, m1, m2, 0.2).unwrap();
    let cache = precompute(&inst).unwrap();
    assert!(!cache.is_whitened());
    let mut st = AdmmState::zeros(&inst, &cache);
    randomize(&mut st, 11);
    update_b(&mut st, &cache, 0.7);
    assert!(dense_stationarity(&inst, &cache, &st, 0.7) <= 1e-9);
}

#[test]
fn dense_fallback_solves_the_problem() {
    let prob = common::random_problem(3, 3, 8, 5);
    let mut g = common::rng(8);
    let mut m1 = common::gauss(&mut g, 3, 3);
    m1.column_mut(2).fill(0.0);
    let m2 = DMatrix::identity(3, 3);
    let inst =
        GeneralizedInstance::new(prob.design().clone(), 3, 3, prob.y().clone(), m1.clone(), m2.clone(), 0.05).unwrap();
    let sol = solve(&inst, &AdmmConfig::default().with_tol(1e-9), None).unwrap();
    assert!(sol.converged);
    // Directions in the null space of M1 are unpenalized, the rest are shrunk.
    let perturbed = inst.objective(&(&sol.coef + DMatrix::from_fn(3, 3, |i, j| 1e-4 * ((i + 2 * j) as f64).sin())));
    assert!(perturbed >= sol.objective - 1e-12);
}

#[test]
fn warm_start_at_the_same_lambda_is_nearly_free() {
    let prob = common::random_problem(4, 5, 10, 2);
    let gram = GramFactor::new(&prob).unwrap();
    let w = compute_weights(&min_norm_least_squares(&prob, &gram), 1.0, 10).unwrap();
    let inst = GeneralizedInstance::from_problem(&prob, &w, 0.2 * tracescreen::model::lambda_max(&prob, &w)).unwrap();
    let cfg = AdmmConfig::default();
    let cold = solve(&inst, &cfg, None).unwrap();
    let warm = solve(&inst, &cfg, Some(&cold.warm)).unwrap();
    assert!(cold.converged && warm.converged);
    assert!(warm.iters < cold.iters, "{} vs {}", warm.iters, cold.iters);
    assert!(common::rel_diff(&warm.b, &cold.b) < 1e-4);
}

#[test]
fn iteration_cap_returns_best_iterate_unconverged() {
    let prob = common::random_problem(4, 5, 10, 3);
    let w = tracescreen::model::WeightPair::identity(4, 5);
    let inst = GeneralizedInstance::from_problem(&prob, &w, 0.05).unwrap();
    let cfg = AdmmConfig { max_iter: 3, ..AdmmConfig::default() };
    let sol = solve(&inst, &cfg, None).unwrap();
    assert!(!sol.converged);
    assert_eq!(sol.iters, 3);
    assert!(sol.b.iter().all(|v| v.is_finite()));
    assert!(sol.residuals.max() > cfg.tol_primal);
}

#[test]
fn objective_matches_problem_objective() {
    let prob = common::random_problem(3, 4, 7, 4);
    let gram = GramFactor::new(&prob).unwrap();
    let w = compute_weights(&min_norm_least_squares(&prob, &gram), 0.5, 7).unwrap();
    let inst = GeneralizedInstance::from_problem(&prob, &w, 0.1).unwrap();
    let sol = solve(&inst, &AdmmConfig::default(), None).unwrap();
    assert!((sol.objective - prob.objective(&w, &sol.b, 0.1)).abs() <= 1e-12 * sol.objective);
}

#[test]
fn fixed_penalty_also_converges() {
    let prob = common::random_problem(3, 3, 6, 9);
    let w = tracescreen::model::WeightPair::identity(3, 3);
    let inst = GeneralizedInstance::from_problem(&prob, &w, 0.3).unwrap();
    let a = solve(&inst, &AdmmConfig { penalty: Penalty::Fixed(1.0), ..AdmmConfig::default() }.with_tol(1e-9), None)
        .unwrap();
    let b = solve(&inst, &AdmmConfig::default().with_tol(1e-9), None).unwrap();
    assert!(a.converged && b.converged);
    assert!(common::rel_diff(&a.b, &b.b) < 1e-6);
}

#[test]
fn invalid_configurations_are_rejected() {
    let one = DMatrix::from_element(1, 1, 1.0);
    let inst =
        GeneralizedInstance::new(one.clone(), 1, 1, DVector::from_element(1, 1.0), one.clone(), one, 0.5).unwrap();
    for cfg in [
        AdmmConfig { tau: GOLDEN, ..AdmmConfig::default() },
        AdmmConfig { tau: 0.0, ..AdmmConfig::default() },
        AdmmConfig { penalty: Penalty::Fixed(0.0), ..AdmmConfig::default() },
        AdmmConfig { max_iter: 0, ..AdmmConfig::default() },
        AdmmConfig::default().with_tol(0.0),
    ] {
        assert!(solve(&inst, &cfg, None).is_err());
    }
}
