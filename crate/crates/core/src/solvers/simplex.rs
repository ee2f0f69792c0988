//! Dense two-phase tableau simplex with Bland's rule.

use super::SolveDiagnostics;
use crate::error::{Error, Result};
use crate::linalg::{solve, Matrix};

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-11;

/// `minimize c'x  subject to  G x <= h,  x >= 0`.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub constraints: Matrix,
    pub bounds: Vec<f64>,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>, constraints: Matrix, bounds: Vec<f64>) -> Result<Self> {
        if constraints.cols() != objective.len() || constraints.rows() != bounds.len() {
            return Err(Error::dim(format!(
                "LP with {} variables and {} bounds cannot use a {}x{} constraint matrix",
                objective.len(),
                bounds.len(),
                constraints.rows(),
                constraints.cols()
            )));
        }
        if objective.iter().chain(&bounds).any(|v| !v.is_finite()) {
            return Err(Error::invalid("LP data must be finite"));
        }
        Ok(LpProblem {
            objective,
            constraints,
            bounds,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// `max(max_i (Gx - h)_i, max_j -x_j, 0)`
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let gx = self.constraints.matvec(x);
        let rows = gx
            .iter()
            .zip(&self.bounds)
            .map(|(a, b)| a - b)
            .fold(0.0, f64::max);
        x.iter().map(|v| -v).fold(rows, f64::max)
    }
}

struct Tableau {
    // m rows of [columns | rhs]
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    ncols: usize,
    pivots: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let pv = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= pv;
        }
        let prow = self.t[row].clone();
        for (r, line) in self.t.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let f = line[col];
            if f != 0.0 {
                for (v, &pr) in line.iter_mut().zip(&prow) {
                    *v -= f * pr;
                }
                line[col] = 0.0;
            }
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Reduced costs for `cost` given the current basis.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut rc = cost.to_vec();
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for (j, v) in rc.iter_mut().enumerate() {
                    *v -= cb * self.t[r][j];
                }
            }
        }
        rc
    }

    /// Runs Bland-rule pivots minimizing `cost` over columns allowed by `allowed`.
    fn optimize(&mut self, cost: &[f64], allowed: &dyn Fn(usize) -> bool) -> Result<()> {
        let rhs = self.ncols;
        loop {
            let rc = self.reduced_costs(cost);
            let entering = (0..self.ncols).find(|&j| allowed(j) && rc[j] < -COST_EPS);
            let Some(col) = entering else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for (r, line) in self.t.iter().enumerate() {
                let a = line[col];
                if a > PIVOT_EPS {
                    let ratio = line[rhs] / a;
                    best = match best {
                        None => Some((r, ratio)),
                        Some((br, bv)) => {
                            if ratio < bv - 1e-14
                                || ((ratio - bv).abs() <= 1e-14 && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, bv))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = best else {
                return Err(Error::Unbounded(col));
            };
            self.pivot(row, col);
        }
    }
}

/// Solves an [`LpProblem`] and returns an optimal vertex.
pub fn simplex_lp(lp: &LpProblem) -> Result<(Vec<f64>, SolveDiagnostics)> {
    let n = lp.num_vars();
    let m = lp.bounds.len();
    let needs_art: Vec<bool> = lp.bounds.iter().map(|&h| h < 0.0).collect();
    let n_art = needs_art.iter().filter(|&&b| b).count();
    // columns: x (n) | slacks (m) | artificials (n_art)
    let ncols = n + m + n_art;
    let mut t = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut art_idx = n + m;
    for i in 0..m {
        let mut line = vec![0.0; ncols + 1];
        let sign = if needs_art[i] { -1.0 } else { 1.0 };
        for j in 0..n {
            line[j] = sign * lp.constraints[(i, j)];
        }
        line[n + i] = sign;
        line[ncols] = sign * lp.bounds[i];
        if needs_art[i] {
            line[art_idx] = 1.0;
            basis.push(art_idx);
            art_idx += 1;
        } else {
            basis.push(n + i);
        }
        t.push(line);
    }
    let mut tab = Tableau {
        t,
        basis,
        ncols,
        pivots: 0,
    };
    let is_art = |j: usize| j >= n + m;

    if n_art > 0 {
        let mut cost1 = vec![0.0; ncols];
        for c in cost1.iter_mut().skip(n + m) {
            *c = 1.0;
        }
        tab.optimize(&cost1, &|_| true)?;
        let infeas: f64 = tab
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| is_art(b))
            .map(|(r, _)| tab.t[r][ncols])
            .sum();
        let scale = 1.0 + lp.bounds.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        if infeas > 1e-9 * scale {
            return Err(Error::Infeasible(infeas));
        }
        // drive zero-level artificials out of the basis where possible
        for r in 0..m {
            if is_art(tab.basis[r]) {
                if let Some(col) = (0..n + m).find(|&j| tab.t[r][j].abs() > 1e-9) {
                    tab.pivot(r, col);
                }
            }
        }
    }

    let mut cost2 = vec![0.0; ncols];
    cost2[..n].copy_from_slice(&lp.objective);
    tab.optimize(&cost2, &|j| !is_art(j))?;

    let mut x = vec![0.0; n];
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.t[r][ncols];
        }
    }
    if let Some(refined) = refine_vertex(lp, &tab.basis) {
        if lp.max_violation(&refined) <= lp.max_violation(&x) {
            x = refined;
        }
    }
    for v in x.iter_mut() {
        if *v < 0.0 && *v > -1e-12 {
            *v = 0.0;
        }
    }
    let resid = lp.max_violation(&x);
    Ok((
        x,
        SolveDiagnostics {
            iterations: tab.pivots,
            final_kkt_residual: resid,
            converged: true,
        },
    ))
}

/// Re-solves the final basis system against the original data to shed tableau rounding.
fn refine_vertex(lp: &LpProblem, basis: &[usize]) -> Option<Vec<f64>> {
    let n = lp.num_vars();
    let m = lp.bounds.len();
    if basis.iter().any(|&b| b >= n + m) {
        return None;
    }
    let mut a = Matrix::zeros(m, m);
    for (k, &b) in basis.iter().enumerate() {
        for i in 0..m {
            a[(i, k)] = if b < n {
                lp.constraints[(i, b)]
            } else if b - n == i {
                1.0
            } else {
                0.0
            };
        }
    }
    let sol = solve(&a, &lp.bounds).ok()?;
    let mut x = vec![0.0; n];
    for (k, &b) in basis.iter().enumerate() {
        if b < n {
            x[b] = sol[k];
        }
    }
    Some(x)
}

/// `minimize ||b||_1  subject to  ||c - M b||_inf <= lambda`, through the split
/// `b = b+ - b-` with both parts nonnegative.
pub fn l1_min_linf_constrained(m: &Matrix, c: &[f64], lambda: f64) -> Result<(Vec<f64>, SolveDiagnostics)> {
    let p = m.cols();
    if m.rows() != c.len() {
        return Err(Error::dim("constraint matrix and target disagree"));
    }
    if !(lambda >= 0.0) {
        return Err(Error::invalid("lambda must be >= 0"));
    }
    let q = m.rows();
    let mut g = Matrix::zeros(2 * q, 2 * p);
    let mut h = vec![0.0; 2 * q];
    for i in 0..q {
        for j in 0..p {
            let v = m[(i, j)];
            // c - M b <= lambda   ->  -M b+ + M b- <= lambda - c
            g[(i, j)] = -v;
            g[(i, p + j)] = v;
            // M b - c <= lambda   ->   M b+ - M b- <= lambda + c
            g[(q + i, j)] = v;
            g[(q + i, p + j)] = -v;
        }
        h[i] = lambda - c[i];
        h[q + i] = lambda + c[i];
    }
    let lp = LpProblem::new(vec![1.0; 2 * p], g, h)?;
    let (x, diag) = simplex_lp(&lp)?;
    let beta = (0..p).map(|j| x[j] - x[p + j]).collect();
    Ok((beta, diag))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_variable_lower_bound() {
        let g = Matrix::from_rows(&[vec![-1.0], vec![1.0]]).unwrap();
        let lp = LpProblem::new(vec![1.0], g, vec![-1.0, 3.0]).unwrap();
        let (x, d) = simplex_lp(&lp).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!(d.final_kkt_residual <= 1e-9);
    }

    #[test]
    fn two_variable_lower_bounds() {
        let g = Matrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        let lp = LpProblem::new(vec![1.0, 1.0], g, vec![-0.5, -0.25]).unwrap();
        let (x, _) = simplex_lp(&lp).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12 && (x[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn infeasible_is_reported() {
        // x <= 1 and x >= 2
        let g = Matrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        let lp = LpProblem::new(vec![1.0], g, vec![1.0, -2.0]).unwrap();
        assert!(matches!(simplex_lp(&lp), Err(Error::Infeasible(_))));
    }

    #[test]
    fn unbounded_is_reported() {
        // minimize -x subject to -x <= 0
        let g = Matrix::from_rows(&[vec![-1.0]]).unwrap();
        let lp = LpProblem::new(vec![-1.0], g, vec![0.0]).unwrap();
        assert!(matches!(simplex_lp(&lp), Err(Error::Unbounded(0))));
    }

    #[test]
    fn degenerate_problem_terminates() {
        // classic Beale-style degenerate vertex; Bland's rule must not cycle
        let g = Matrix::from_rows(&[
            vec![0.25, -60.0, -0.04, 9.0],
            vec![0.5, -90.0, -0.02, 3.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ])
        .unwrap();
        let lp = LpProblem::new(vec![-0.75, 150.0, -0.02, 6.0], g, vec![0.0, 0.0, 1.0]).unwrap();
        let (x, _) = simplex_lp(&lp).unwrap();
        let obj: f64 = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
        assert!((obj + 0.05).abs() < 1e-9, "objective {obj}");
    }

    #[test]
    fn l1_program_separable_case() {
        let m = Matrix::from_diag(&[2.0, 2.0]);
        let (b, _) = l1_min_linf_constrained(&m, &[3.0, -0.5], 1.0).unwrap();
        // |3 - 2 b0| <= 1 -> b0 in [1, 2]; |-0.5 - 2 b1| <= 1 -> b1 in [-0.75, 0.25]
        assert!((b[0] - 1.0).abs() < 1e-12);
        assert!(b[1].abs() < 1e-12);
    }

    #[test]
    fn dimension_checks() {
        assert!(LpProblem::new(vec![1.0], Matrix::zeros(2, 2), vec![0.0, 0.0]).is_err());
    }
}
