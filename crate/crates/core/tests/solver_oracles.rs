mod common;

use common::*;
use tlasso::linalg::gram;
use tlasso::solvers::{coordinate_descent_lasso, l1_min_linf_constrained, CdOptions};

#[test]
fn coordinate_descent_matches_proximal_gradient() {
    for seed in 0..10 {
        let mut r = rng(100 + seed);
        let x = gaussian_matrix(10, 8, &mut r);
        let y = gaussian_vec(10, &mut r);
        let lambda = 0.5 + seed as f64;
        let (beta, diag) = coordinate_descent_lasso(&x, &y, lambda, &CdOptions::default()).unwrap();
        assert!(diag.converged);
        let oracle = ista(&x, &y, lambda, 1_000_000);
        let a = lasso_objective(&x, &y, &beta, lambda);
        let b = lasso_objective(&x, &y, &oracle, lambda);
        assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()), "seed {seed}: {a} vs {b}");
    }
}

#[test]
fn simplex_matches_vertex_enumeration() {
    for seed in 0..10 {
        let mut r = rng(200 + seed);
        let x = gaussian_matrix(6, 3, &mut r);
        let y = gaussian_vec(6, &mut r);
        let m = gram(&x);
        let c = x.t_matvec(&y);
        let cmax = c.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let lambda = cmax * (0.1 + 0.08 * seed as f64);
        let (beta, _) = l1_min_linf_constrained(&m, &c, lambda).unwrap();
        let (obj, _) = dantzig_by_vertices(&m, &c, lambda).unwrap();
        let l1: f64 = beta.iter().map(|v| v.abs()).sum();
        assert!((l1 - obj).abs() < 1e-8, "seed {seed}: {l1} vs {obj}");
    }
}

#[test]
fn lasso_on_orthogonal_design_is_soft_threshold() {
    let mut r = rng(5);
    let x = orthogonal_design(12, 4, &mut r);
    let y = gaussian_vec(12, &mut r);
    let lambda = 2.0;
    let (beta, _) = coordinate_descent_lasso(&x, &y, lambda, &CdOptions::default()).unwrap();
    let c = x.t_matvec(&y);
    for j in 0..4 {
        let expect = c[j].signum() * (c[j].abs() - lambda).max(0.0) / 12.0;
        assert!((beta[j] - expect).abs() < 1e-9);
    }
}
