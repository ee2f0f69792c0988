//! Dense row-major matrices and the handful of factorizations the estimators need.
//!
//! Everything here is sized for desk-scale problems (a few hundred rows, `p` up to
//! roughly 100). Vectors are plain `Vec<f64>` / `&[f64]`.

use std::ops::{Index, IndexMut};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Dense real matrix stored in row-major order. All entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting size mismatches and non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::dim(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::dim("ragged rows"));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// First `k` rows as a new matrix.
    pub fn top_rows(&self, k: usize) -> Matrix {
        let k = k.min(self.rows);
        Matrix {
            rows: k,
            cols: self.cols,
            data: self.data[..k * self.cols].to_vec(),
        }
    }

    pub fn select_columns(&self, idx: &[usize]) -> Matrix {
        Matrix::from_fn(self.rows, idx.len(), |i, j| self[(i, idx[j])])
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::dim("vstack column counts differ"));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Scales column `j` by `s[j]`, i.e. `self * diag(s)`.
    pub fn scale_columns(&self, s: &[f64]) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * s[j])
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dim(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::dim(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * v`
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "matvec length mismatch");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `self' * v`
    pub fn t_matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows, "t_matvec length mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Replaces `self` with `(self + self') / 2`.
    pub fn symmetrize(&mut self) {
        debug_assert!(self.is_square());
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2_sq(v: &[f64]) -> f64 {
    dot(v, v)
}

pub fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn sub_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `X'X`, symmetrized after accumulation so the result is exactly symmetric.
pub fn gram(x: &Matrix) -> Matrix {
    let p = x.cols();
    let mut g = Matrix::zeros(p, p);
    for i in 0..x.rows() {
        let r = x.row(i);
        for a in 0..p {
            let ra = r[a];
            if ra == 0.0 {
                continue;
            }
            for b in a..p {
                g[(a, b)] += ra * r[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            g[(a, b)] = g[(b, a)];
        }
    }
    g.symmetrize();
    g
}

/// Default relative eigenvalue cutoff for a Gram matrix built from an `n x p` design.
pub fn default_rtol(n: usize, p: usize) -> f64 {
    1e-10 * n.max(p) as f64
}

fn check_symmetric(m: &Matrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::dim(format!(
            "expected a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let asym = m.max_asymmetry();
    if asym > 1e-10 * (1.0 + m.max_abs()) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Eigen-decomposition of a symmetric matrix: eigenvalues and column eigenvectors.
pub struct SymmetricSpectrum {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

pub fn symmetric_eigen(m: &Matrix) -> Result<SymmetricSpectrum> {
    check_symmetric(m)?;
    let eig = SymmetricEigen::new(m.to_nalgebra());
    let n = m.rows();
    let vectors = Matrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, j)]);
    Ok(SymmetricSpectrum {
        values: eig.eigenvalues.iter().copied().collect(),
        vectors,
    })
}

/// Moore-Penrose pseudo-inverse of a symmetric PSD matrix.
///
/// Eigenvalues at or below `rtol * lambda_max` are treated as zero.
pub fn pseudo_inverse(m: &Matrix, rtol: f64) -> Result<Matrix> {
    let spec = symmetric_eigen(m)?;
    let n = m.rows();
    let lmax = spec.values.iter().fold(0.0_f64, |a, &b| a.max(b));
    let cutoff = rtol * lmax;
    let mut out = Matrix::zeros(n, n);
    if lmax <= 0.0 {
        return Ok(out);
    }
    for (k, &lam) in spec.values.iter().enumerate() {
        if lam <= cutoff {
            continue;
        }
        let inv = 1.0 / lam;
        for i in 0..n {
            let qi = spec.vectors[(i, k)] * inv;
            if qi == 0.0 {
                continue;
            }
            for j in 0..n {
                out[(i, j)] += qi * spec.vectors[(j, k)];
            }
        }
    }
    out.symmetrize();
    Ok(out)
}

/// Number of eigenvalues of a symmetric PSD matrix above `rtol * lambda_max`.
pub fn numerical_rank(m: &Matrix, rtol: f64) -> Result<usize> {
    let spec = symmetric_eigen(m)?;
    let lmax = spec.values.iter().fold(0.0_f64, |a, &b| a.max(b));
    if lmax <= 0.0 {
        return Ok(0);
    }
    Ok(spec.values.iter().filter(|&&v| v > rtol * lmax).count())
}

/// Lower-triangular `L` with `L L' = S`.
pub fn cholesky(s: &Matrix) -> Result<Matrix> {
    check_symmetric(s)?;
    let n = s.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { column: j, pivot: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut v = s[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / djj;
        }
    }
    Ok(l)
}

/// Solves `M x = b` by Gaussian elimination with partial pivoting.
pub fn solve(m: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = m.rows();
    if !m.is_square() || b.len() != n {
        return Err(Error::dim("solve expects a square system"));
    }
    let mut a = m.clone();
    let mut x = b.to_vec();
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| a[(r, col)].abs().total_cmp(&a[(s, col)].abs()))
            .unwrap_or(col);
        if a[(piv, col)].abs() <= 1e-14 * scale {
            return Err(Error::Singular);
        }
        if piv != col {
            for j in 0..n {
                let tmp = a[(col, j)];
                a[(col, j)] = a[(piv, j)];
                a[(piv, j)] = tmp;
            }
            x.swap(col, piv);
        }
        let d = a[(col, col)];
        for r in (col + 1)..n {
            let f = a[(r, col)] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[(r, j)] -= f * a[(col, j)];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut v = x[col];
        for j in (col + 1)..n {
            v -= a[(col, j)] * x[j];
        }
        x[col] = v / a[(col, col)];
    }
    Ok(x)
}

/// Inverse by solving against the identity.
pub fn inverse(m: &Matrix) -> Result<Matrix> {
    let n = m.rows();
    let mut out = Matrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = solve(m, &e)?;
        for i in 0..n {
            out[(i, j)] = col[i];
        }
    }
    Ok(out)
}

/// AR(1) correlation matrix `S_ij = rho^|i-j|`.
pub fn ar1_covariance(p: usize, rho: f64) -> Matrix {
    Matrix::from_fn(p, p, |i, j| rho.powi((i as i32 - j as i32).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    fn random_orthogonal(n: usize, seed: u64) -> Matrix {
        // Gram-Schmidt on a Gaussian matrix.
        let g = random_matrix(n, n, seed);
        let mut cols: Vec<Vec<f64>> = Vec::new();
        for j in 0..n {
            let mut v = g.column(j);
            for q in &cols {
                let c = dot(&v, q);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * qi;
                }
            }
            let nrm = norm2_sq(&v).sqrt();
            v.iter_mut().for_each(|x| *x /= nrm);
            cols.push(v);
        }
        Matrix::from_fn(n, n, |i, j| cols[j][i])
    }

    fn max_diff(a: &Matrix, b: &Matrix) -> f64 {
        a.sub(b).unwrap().max_abs()
    }

    #[test]
    fn gram_of_column_vector() {
        let x = Matrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        assert_eq!(gram(&x), Matrix::from_rows(&[vec![2.0]]).unwrap());
        assert_eq!(gram(&Matrix::identity(3)), Matrix::identity(3));
    }

    #[test]
    fn gram_is_symmetric_and_matches_quadratic_form() {
        let x = random_matrix(5, 3, 11);
        let g = gram(&x);
        assert_eq!(g.max_asymmetry(), 0.0);
        assert!(g.diag().iter().all(|&d| d >= 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let v: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
            let quad = dot(&v, &g.matvec(&v));
            let direct = norm2_sq(&x.matvec(&v));
            assert!((quad - direct).abs() <= 1e-12 * (1.0 + direct));
        }
    }

    #[test]
    fn pinv_of_identity_and_diag() {
        let i4 = Matrix::identity(4);
        assert!(max_diff(&pseudo_inverse(&i4, 1e-10).unwrap(), &i4) < 1e-15);
        let d = Matrix::from_diag(&[2.0, 0.0]);
        let pd = pseudo_inverse(&d, 1e-10).unwrap();
        assert!(max_diff(&pd, &Matrix::from_diag(&[0.5, 0.0])) < 1e-15);
    }

    #[test]
    fn pinv_rank_two_against_spectral_construction() {
        let q = random_orthogonal(4, 3);
        let m = q
            .matmul(&Matrix::from_diag(&[3.0, 1.0, 0.0, 0.0]))
            .unwrap()
            .matmul(&q.transpose())
            .unwrap();
        let mut m = m;
        m.symmetrize();
        let expected = q
            .matmul(&Matrix::from_diag(&[1.0 / 3.0, 1.0, 0.0, 0.0]))
            .unwrap()
            .matmul(&q.transpose())
            .unwrap();
        let mp = pseudo_inverse(&m, 1e-10).unwrap();
        assert!(max_diff(&mp, &expected) < 1e-10);
        let mmm = m.matmul(&mp).unwrap().matmul(&m).unwrap();
        assert!(max_diff(&mmm, &m) < 1e-10);
    }

    #[test]
    fn pinv_rejects_non_symmetric() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(pseudo_inverse(&m, 1e-10), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn pinv_matches_inverse_on_invertible_gram() {
        let x = random_matrix(12, 5, 7);
        let g = gram(&x);
        let pinv = pseudo_inverse(&g, default_rtol(12, 5)).unwrap();
        let inv = inverse(&g).unwrap();
        assert!(max_diff(&pinv, &inv) <= 1e-8 * inv.max_abs());
    }

    #[test]
    fn cholesky_examples() {
        assert_eq!(cholesky(&Matrix::identity(3)).unwrap(), Matrix::identity(3));
        let s = Matrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 2.0]]).unwrap();
        let l = cholesky(&s).unwrap();
        assert_eq!(l, Matrix::from_rows(&[vec![2.0, 0.0], vec![1.0, 1.0]]).unwrap());
        let ar = ar1_covariance(8, 0.5);
        let l = cholesky(&ar).unwrap();
        let rebuilt = l.matmul(&l.transpose()).unwrap();
        assert!(max_diff(&rebuilt, &ar) < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let s = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(
            cholesky(&s),
            Err(Error::NotPositiveDefinite { column: 1, .. })
        ));
    }

    #[test]
    fn from_vec_validates() {
        assert!(Matrix::from_vec(2, 2, vec![1.0; 3]).is_err());
        assert_eq!(
            Matrix::from_vec(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite(1))
        );
    }

    #[test]
    fn solve_detects_singular() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert_eq!(solve(&m, &[1.0, 1.0]), Err(Error::Singular));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn penrose_conditions(seed in 0u64..10_000, rows in 1usize..8, cols in 1usize..7) {
                let x = random_matrix(rows, cols, seed);
                let m = gram(&x);
                let mp = pseudo_inverse(&m, default_rtol(rows, cols)).unwrap();
                let tol = 1e-8 * (1.0 + m.max_abs());
                let mmm = m.matmul(&mp).unwrap().matmul(&m).unwrap();
                prop_assert!(max_diff(&mmm, &m) <= tol);
                let pmp = mp.matmul(&m).unwrap().matmul(&mp).unwrap();
                prop_assert!(max_diff(&pmp, &mp) <= 1e-8 * (1.0 + mp.max_abs()));
                let mmp = m.matmul(&mp).unwrap();
                prop_assert!(max_diff(&mmp, &mmp.transpose()) <= tol);
            }
        }
    }
}
