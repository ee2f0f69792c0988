//! Independent reference solvers and instance generators shared by the
//! integration tests. None of these call into the crate's solvers.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tlasso::linalg::Matrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vec(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Rescales columns so that `X_j'X_j = n`.
pub fn normalize_columns(x: &Matrix) -> Matrix {
    let n = x.rows() as f64;
    let s: Vec<f64> = (0..x.cols())
        .map(|j| {
            let c = x.column(j);
            1.0 / (c.iter().map(|v| v * v).sum::<f64>() / n).sqrt()
        })
        .collect();
    x.scale_columns(&s)
}

/// Gram-Schmidt on a Gaussian matrix, scaled so `X'X = n I`.
pub fn orthogonal_design(n: usize, p: usize, rng: &mut ChaCha8Rng) -> Matrix {
    assert!(n >= p);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    while cols.len() < p {
        let mut v = gaussian_vec(n, rng);
        for _ in 0..2 {
            for c in &cols {
                let d: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= d * ci;
                }
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            cols.push(v.iter().map(|a| a / norm).collect());
        }
    }
    let scale = (n as f64).sqrt();
    Matrix::from_fn(n, p, |i, j| scale * cols[j][i])
}

fn matvec(b: &Matrix, v: &[f64]) -> Vec<f64> {
    (0..b.rows())
        .map(|i| (0..b.cols()).map(|j| b[(i, j)] * v[j]).sum())
        .collect()
}

fn t_matvec(b: &Matrix, v: &[f64]) -> Vec<f64> {
    (0..b.cols())
        .map(|j| (0..b.rows()).map(|i| b[(i, j)] * v[i]).sum())
        .collect()
}

/// `||y - B b||^2 + 2 lambda ||b||_1`, evaluated directly from the design.
pub fn lasso_objective(b: &Matrix, y: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let fit = matvec(b, beta);
    let rss: f64 = y.iter().zip(&fit).map(|(a, f)| (a - f) * (a - f)).sum();
    rss + 2.0 * lambda * beta.iter().map(|v| v.abs()).sum::<f64>()
}

fn spectral_norm_sq(b: &Matrix) -> f64 {
    let mut v = vec![1.0; b.cols()];
    let mut est = 0.0;
    for _ in 0..2000 {
        let w = t_matvec(b, &matvec(b, &v));
        let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        v = w.iter().map(|a| a / norm).collect();
        if (norm - est).abs() <= 1e-15 * norm {
            est = norm;
            break;
        }
        est = norm;
    }
    est
}

/// Proximal gradient with step `1 / L`, `L = 2 ||B||^2`, for up to `iters` steps.
pub fn ista(b: &Matrix, y: &[f64], lambda: f64, iters: usize) -> Vec<f64> {
    let l = 2.0 * spectral_norm_sq(b) * (1.0 + 1e-12);
    let step = 1.0 / l;
    let mut beta = vec![0.0; b.cols()];
    for _ in 0..iters {
        let r: Vec<f64> = y.iter().zip(matvec(b, &beta)).map(|(a, f)| a - f).collect();
        let g = t_matvec(b, &r);
        let mut delta: f64 = 0.0;
        for j in 0..beta.len() {
            let z = beta[j] + 2.0 * step * g[j];
            let t = 2.0 * lambda * step;
            let nb = z.signum() * (z.abs() - t).max(0.0);
            delta = delta.max((nb - beta[j]).abs());
            beta[j] = nb;
        }
        if delta < 1e-15 {
            break;
        }
    }
    beta
}

#[allow(clippy::needless_range_loop)]
fn solve_small(a: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let k = rhs.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(rhs)
        .map(|(r, &v)| {
            let mut row = r.clone();
            row.push(v);
            row
        })
        .collect();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..k {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..=k {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    Some((0..k).map(|i| m[i][k] / m[i][i]).collect())
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// `min ||b||_1  s.t.  ||c - M b||_inf <= lambda` by enumerating every vertex of the
/// arrangement formed by the constraint faces and the coordinate planes.
pub fn dantzig_by_vertices(m: &Matrix, c: &[f64], lambda: f64) -> Option<(f64, Vec<f64>)> {
    let p = m.cols();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..m.rows() {
        let row: Vec<f64> = (0..p).map(|j| m[(i, j)]).collect();
        planes.push((row.clone(), c[i] - lambda));
        planes.push((row, c[i] + lambda));
    }
    for j in 0..p {
        let mut e = vec![0.0; p];
        e[j] = 1.0;
        planes.push((e, 0.0));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for idx in subsets(planes.len(), p) {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let rhs: Vec<f64> = idx.iter().map(|&i| planes[i].1).collect();
        let Some(b) = solve_small(&a, &rhs) else { continue };
        let resid = (0..m.rows())
            .map(|i| (c[i] - (0..p).map(|j| m[(i, j)] * b[j]).sum::<f64>()).abs())
            .fold(0.0, f64::max);
        if resid > lambda + 1e-9 * (1.0 + lambda) {
            continue;
        }
        let obj: f64 = b.iter().map(|v| v.abs()).sum();
        if best.as_ref().is_none_or(|(o, _)| obj < *o) {
            best = Some((obj, b));
        }
    }
    best
}
