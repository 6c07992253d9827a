//! Dense two-phase simplex for small standard-form linear programs
//! `max c.x  s.t.  A x = b, x >= 0`. Bland's rule prevents cycling.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    /// Dual vector `y` with `A^T y >= c` and `b.y = objective`.
    pub duals: DVector<f64>,
}

#[derive(Debug)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// Rows `0..m` constraints, row `m` reduced costs; last column is the rhs.
    t: DMatrix<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn rhs_col(&self) -> usize {
        self.t.ncols() - 1
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[(row, col)];
        let ncols = self.t.ncols();
        for j in 0..ncols {
            self.t[(row, j)] /= p;
        }
        for i in 0..self.t.nrows() {
            if i == row {
                continue;
            }
            let f = self.t[(i, col)];
            if f != 0.0 {
                for j in 0..ncols {
                    let v = self.t[(row, j)];
                    self.t[(i, j)] -= f * v;
                }
            }
        }
        self.basis[row] = col;
    }

    /// Minimizes the objective row over columns `allowed`. Returns false if unbounded.
    fn optimize(&mut self, allowed: usize) -> Result<bool> {
        let m = self.basis.len();
        let rhs = self.rhs_col();
        for _ in 0..MAX_PIVOTS {
            // Bland: lowest-index column with negative reduced cost.
            let Some(col) = (0..allowed).find(|&j| self.t[(m, j)] < -PIVOT_TOL) else {
                return Ok(true);
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.t[(i, col)];
                if a > PIVOT_TOL {
                    let ratio = self.t[(i, rhs)] / a;
                    match best {
                        Some((bi, br))
                            if ratio > br + 1e-14
                                || (ratio >= br - 1e-14 && self.basis[i] >= self.basis[bi]) => {}
                        _ => best = Some((i, ratio)),
                    }
                }
            }
            match best {
                Some((row, _)) => self.pivot(row, col),
                None => return Ok(false),
            }
        }
        Err(Error::LinearProgram(format!("no termination after {MAX_PIVOTS} pivots")))
    }
}

/// Solves `max c.x  s.t.  A x = b, x >= 0`.
pub fn solve_standard_form(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>) -> Result<LpOutcome> {
    let (m, n) = a.shape();
    if b.len() != m || c.len() != n {
        return Err(Error::Dimension("LP data shapes disagree".into()));
    }
    // Flip rows so that b >= 0.
    let sign: Vec<f64> = b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();

    // Phase 1: artificials n..n+m, minimize their sum.
    let mut t = DMatrix::zeros(m + 1, n + m + 1);
    for i in 0..m {
        for j in 0..n {
            t[(i, j)] = sign[i] * a[(i, j)];
        }
        t[(i, n + i)] = 1.0;
        t[(i, n + m)] = sign[i] * b[i];
    }
    for j in 0..=n + m {
        if j >= n && j < n + m {
            continue;
        }
        let s: f64 = (0..m).map(|i| t[(i, j)]).sum();
        t[(m, j)] = -s;
    }
    let mut tab = Tableau {
        t,
        basis: (n..n + m).collect(),
    };
    tab.optimize(n + m)?;
    let infeasibility = -tab.t[(m, n + m)];
    let scale = 1.0 + b.amax();
    if infeasibility > 1e-9 * scale {
        return Ok(LpOutcome::Infeasible);
    }

    // Drive artificials out of the basis; rows with no eligible pivot are redundant.
    let mut keep: Vec<usize> = Vec::with_capacity(m);
    for i in 0..m {
        if tab.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| tab.t[(i, j)].abs() > 1e-9) {
                tab.pivot(i, j);
                keep.push(i);
            }
        } else {
            keep.push(i);
        }
    }

    // Phase 2 on the kept rows without artificial columns.
    let mk = keep.len();
    let mut t2 = DMatrix::zeros(mk + 1, n + 1);
    let mut basis2 = Vec::with_capacity(mk);
    for (r, &i) in keep.iter().enumerate() {
        for j in 0..n {
            t2[(r, j)] = tab.t[(i, j)];
        }
        t2[(r, n)] = tab.t[(i, n + m)];
        basis2.push(tab.basis[i]);
    }
    // Reduced costs for minimizing -c.
    for j in 0..n {
        t2[(mk, j)] = -c[j];
    }
    for (r, &bj) in basis2.iter().enumerate() {
        let f = t2[(mk, bj)];
        if f != 0.0 {
            for j in 0..=n {
                let v = t2[(r, j)];
                t2[(mk, j)] -= f * v;
            }
        }
    }
    let mut tab2 = Tableau { t: t2, basis: basis2 };
    if !tab2.optimize(n)? {
        return Ok(LpOutcome::Unbounded);
    }

    let mut x = DVector::zeros(n);
    for (r, &bj) in tab2.basis.iter().enumerate() {
        x[bj] = tab2.t[(r, n)].max(0.0);
    }
    let objective = c.dot(&x);

    // Duals from B^T y = c_B on the kept (sign-flipped) rows.
    let basis_mat = DMatrix::from_fn(mk, mk, |r, q| sign[keep[r]] * a[(keep[r], tab2.basis[q])]);
    let c_b = DVector::from_fn(mk, |q, _| c[tab2.basis[q]]);
    let y_kept = basis_mat
        .transpose()
        .lu()
        .solve(&c_b)
        .ok_or_else(|| Error::LinearProgram("singular optimal basis".into()))?;
    let mut duals = DVector::zeros(m);
    for (r, &i) in keep.iter().enumerate() {
        duals[i] = sign[i] * y_kept[r];
    }
    Ok(LpOutcome::Optimal(LpSolution { x, objective, duals }))
}
