use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tlasso::sim::{default_grid, preset, run_replication};
use tlasso::solvers::{l1_min_linf_constrained, lasso_path, solve_quadratic, CdOptions, QuadraticLasso};
use tlasso_bench::{dantzig_data, instance};

fn coordinate_descent(c: &mut Criterion) {
    let mut group = c.benchmark_group("cd");
    for &(n, p) in &[(20, 8), (100, 50)] {
        let (x, y) = instance(n, p, 1);
        let q = QuadraticLasso::from_design(&x, &y).unwrap();
        let lambda = 0.1 * q.lambda_max();
        group.bench_with_input(BenchmarkId::new("single", format!("{n}x{p}")), &q, |b, q| {
            b.iter(|| solve_quadratic(black_box(q), lambda, &CdOptions::default()).unwrap())
        });
    }
    let (x, y) = instance(20, 8, 2);
    let grid = default_grid();
    group.bench_function("path-81", |b| {
        b.iter(|| lasso_path(black_box(&x), black_box(&y), &grid, &CdOptions::default()).unwrap())
    });
    group.finish();
}

fn simplex(c: &mut Criterion) {
    let mut group = c.benchmark_group("dantzig-lp");
    for &(n, p) in &[(20, 8), (60, 30)] {
        let (m, corr) = dantzig_data(n, p, 3);
        let lambda = 0.2 * corr.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        group.bench_function(format!("{n}x{p}"), |b| {
            b.iter(|| l1_min_linf_constrained(black_box(&m), black_box(&corr), lambda).unwrap())
        });
    }
    group.finish();
}

fn replication(c: &mut Criterion) {
    let mut group = c.benchmark_group("replication");
    group.sample_size(10);
    for name in ["table1-row2", "table1-row4"] {
        let cfg = preset(name).unwrap();
        group.bench_function(name, |b| b.iter(|| run_replication(black_box(&cfg), 0).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, coordinate_descent, simplex, replication);
criterion_main!(benches);
