//! Shared fixtures for the benchmarks.

use tlasso::linalg::{gram, Matrix};
use tlasso::sim::{gen_design, gen_response, stream_rng};

/// AR(1) design with `rho = 0.5` and the sparse benchmark coefficients padded to `p`.
pub fn instance(n: usize, p: usize, seed: u64) -> (Matrix, Vec<f64>) {
    let mut rng = stream_rng(seed, 0);
    let x = gen_design(n, p, 0.5, &mut rng);
    let mut beta = vec![0.0; p];
    for (j, v) in [3.0, 1.5, 0.0, 0.0, 2.0].into_iter().enumerate().take(p) {
        beta[j] = v;
    }
    let y = gen_response(&x, &beta, 1.0, &mut rng);
    (x, y)
}

/// `(X'X, X'y)` for the Dantzig program.
pub fn dantzig_data(n: usize, p: usize, seed: u64) -> (Matrix, Vec<f64>) {
    let (x, y) = instance(n, p, seed);
    (gram(&x), x.t_matvec(&y))
}
