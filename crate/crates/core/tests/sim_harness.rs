use tlasso::linalg::{ar1_covariance, norm2_sq, sub_vec, Matrix};
use tlasso::sim::*;

fn column_corr(x: &Matrix, a: usize, b: usize) -> f64 {
    let n = x.rows() as f64;
    let ca = x.column(a);
    let cb = x.column(b);
    let ma = ca.iter().sum::<f64>() / n;
    let mb = cb.iter().sum::<f64>() / n;
    let cov: f64 = ca.iter().zip(&cb).map(|(u, v)| (u - ma) * (v - mb)).sum::<f64>() / n;
    let va: f64 = ca.iter().map(|u| (u - ma).powi(2)).sum::<f64>() / n;
    let vb: f64 = cb.iter().map(|v| (v - mb).powi(2)).sum::<f64>() / n;
    cov / (va * vb).sqrt()
}

#[test]
fn independent_columns_at_zero_correlation() {
    let mut rng = stream_rng(1, 0);
    let x = gen_design(100_000, 4, 0.0, &mut rng);
    for a in 0..4 {
        let c = x.column(a);
        let var = c.iter().map(|v| v * v).sum::<f64>() / c.len() as f64;
        assert!((var - 1.0).abs() < 0.02);
        for b in a + 1..4 {
            assert!(column_corr(&x, a, b).abs() < 0.02);
        }
    }
}

#[test]
fn ar1_correlations() {
    let mut rng = stream_rng(2, 0);
    let x = gen_design(100_000, 8, 0.5, &mut rng);
    assert!((column_corr(&x, 0, 1) - 0.5).abs() < 0.02);
    assert!((column_corr(&x, 0, 2) - 0.25).abs() < 0.02);
}

fn ks_distance(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0_f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn recursion_and_cholesky_agree_in_distribution() {
    let mut r1 = stream_rng(3, 0);
    let mut r2 = stream_rng(3, 1);
    let a = gen_design(100_000, 8, 0.7, &mut r1);
    let b = gen_design_cholesky(100_000, 8, 0.7, &mut r2).unwrap();
    for j in [0, 3, 7] {
        assert!(ks_distance(a.column(j), b.column(j)) < 0.02, "column {j}");
    }
    let s = ar1_covariance(8, 0.7);
    assert!((column_corr(&b, 1, 3) - s[(1, 3)]).abs() < 0.02);
}

#[test]
fn dominance_over_twenty_replications() {
    let mut cfg = preset("table1-row2").unwrap();
    cfg.replications = 20;
    cfg.seed = 17;
    for r in run_experiment(&cfg).unwrap() {
        for v in [r.perf_i, r.perf_x, r.perf_z] {
            assert!(v.is_finite() && (0.0..=1.0 + 1e-9).contains(&v));
        }
    }
}

#[test]
fn stored_losses_are_recomputable() {
    let mut cfg = preset("table1-row1").unwrap();
    cfg.replications = 1;
    cfg.seed = 4;
    let r = run_replication(&cfg, 0).unwrap();
    let mut rng = stream_rng(cfg.seed, 0);
    let z = gen_design(cfg.m, cfg.p, cfg.rho, &mut rng);
    let x = z.top_rows(cfg.n);
    for rec in &r.records {
        let d = sub_vec(&rec.beta, &cfg.beta_star);
        let lx = norm2_sq(&x.matvec(&d));
        let lz = norm2_sq(&z.matvec(&d));
        assert!((lx - rec.loss_x).abs() <= 1e-10 * lx.max(1e-300));
        assert!((lz - rec.loss_z).abs() <= 1e-10 * lz.max(1e-300));
    }
}

#[test]
fn experiment_is_order_independent() {
    let mut cfg = preset("table1-row3").unwrap();
    cfg.replications = 4;
    cfg.seed = 8;
    let all = run_experiment(&cfg).unwrap();
    for (k, r) in all.iter().enumerate() {
        assert_eq!(r.rep_index, k);
        assert_eq!(r, &run_replication(&cfg, k).unwrap());
    }
}

#[test]
fn support_recovery_on_orthonormal_noiseless_path() {
    // X'X = n I, so b(lambda) = soft(X'Y, lambda) / n = soft(n b*, lambda) / n
    let n = 16usize;
    let beta = [2.0, 0.0, -0.75, 0.0];
    let grid = geometric_grid(1.2, -20, 20);
    let path: Vec<Vec<f64>> = grid
        .iter()
        .map(|&l| {
            beta.iter()
                .map(|&b: &f64| {
                    let c = n as f64 * b;
                    c.signum() * (c.abs() - l).max(0.0) / n as f64
                })
                .collect()
        })
        .collect();
    let got = support_recovery_lambda(&path, &grid, &beta, SUPPORT_ZERO_TOL).unwrap();
    // recovery holds for every lambda / n < min |b_S| = 0.75
    let expect = grid
        .iter()
        .copied()
        .filter(|&l| l / (n as f64) < 0.75)
        .fold(f64::INFINITY, f64::min);
    assert_eq!(got, expect);
}

#[test]
fn csv_artifacts_have_headers() {
    let mut cfg = preset("table1-row1").unwrap();
    cfg.replications = 2;
    cfg.grid = geometric_grid(1.2, -5, 5);
    let res = run_experiment(&cfg).unwrap();
    let sums = summarize(&res).unwrap();
    let mut a = Vec::new();
    write_results_csv(&mut a, &res).unwrap();
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("rep,estimator,lambda1,lambda2,loss_x,loss_z,loss_beta"));
    assert_eq!(text.lines().count(), 1 + 2 * 11 * 13);
    let mut b = Vec::new();
    write_summary_csv(&mut b, &cfg, &sums).unwrap();
    assert_eq!(String::from_utf8(b).unwrap().lines().count(), 4);
}
