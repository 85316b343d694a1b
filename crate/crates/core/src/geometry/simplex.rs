//! Dense primal simplex for the linear maximization oracle.
//!
//! Solves `max gᵀv` over `{Av <= b, v <= u, v >= 0}` with the upper bounds
//! written as ordinary rows. Because `b > 0` and `u > 0`, the all-slack basis
//! is feasible and no phase one is needed. Bland's rule (lowest eligible
//! index for both entering and leaving variables) prevents cycling, which
//! also fixes the tie-break among optimal vertices.

use nalgebra::DVector;

use super::Polytope;
use crate::error::{check_dim, Error, Result};

/// Absolute optimality tolerance on reduced costs.
pub const LP_TOL: f64 = 1e-9;

const PIVOT_EPS: f64 = 1e-12;

impl Polytope {
    /// Returns a vertex maximizing `⟨g, v⟩` over the polytope.
    pub fn lmo(&self, g: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), g.len())?;
        if self.is_box() {
            return Ok(g.zip_map(&self.upper, |gj, uj| if gj > 0.0 { uj } else { 0.0 }));
        }
        Tableau::new(self, g).solve()
    }
}

struct Tableau {
    n: usize,
    rows: usize,
    cols: usize,
    // rows x (cols + 1); last column is the right-hand side.
    body: Vec<f64>,
    // reduced costs c_j - z_j for each column
    reduced: Vec<f64>,
    basis: Vec<usize>,
    upper: Vec<f64>,
}

impl Tableau {
    fn new(p: &Polytope, g: &DVector<f64>) -> Self {
        let n = p.dim();
        let m = p.num_constraints();
        let rows = m + n;
        let cols = n + rows;
        let width = cols + 1;
        let mut body = vec![0.0; rows * width];
        for i in 0..m {
            for j in 0..n {
                body[i * width + j] = p.a[(i, j)];
            }
            body[i * width + cols] = p.b[i];
        }
        for j in 0..n {
            let r = m + j;
            body[r * width + j] = 1.0;
            body[r * width + cols] = p.upper[j];
        }
        for r in 0..rows {
            body[r * width + n + r] = 1.0;
        }
        let mut reduced = vec![0.0; cols];
        reduced[..n].copy_from_slice(g.as_slice());
        Self {
            n,
            rows,
            cols,
            body,
            reduced,
            basis: (n..cols).collect(),
            upper: p.upper.iter().copied().collect(),
        }
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.body[r * (self.cols + 1) + c]
    }

    fn solve(mut self) -> Result<DVector<f64>> {
        // Bland's rule terminates; the guard only catches numerical trouble.
        let max_pivots = 50 * (self.rows + self.cols);
        for _ in 0..max_pivots {
            let Some(entering) = (0..self.cols).find(|&j| self.reduced[j] > LP_TOL) else {
                return Ok(self.solution());
            };
            let leaving = self.ratio_test(entering).ok_or(Error::LpUnbounded)?;
            self.pivot(leaving, entering);
        }
        Err(Error::LpCycling(max_pivots))
    }

    fn ratio_test(&self, entering: usize) -> Option<usize> {
        let mut best: Option<(f64, usize, usize)> = None;
        for r in 0..self.rows {
            let coef = self.at(r, entering);
            if coef <= PIVOT_EPS {
                continue;
            }
            let ratio = self.at(r, self.cols) / coef;
            let candidate = (ratio, self.basis[r], r);
            best = match best {
                None => Some(candidate),
                Some(current) => {
                    let tie = (ratio - current.0).abs() <= PIVOT_EPS * (1.0 + current.0.abs());
                    if (tie && candidate.1 < current.1) || (!tie && ratio < current.0) {
                        Some(candidate)
                    } else {
                        Some(current)
                    }
                }
            };
        }
        best.map(|(_, _, r)| r)
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.cols + 1;
        let pivot = self.at(row, col);
        for c in 0..width {
            self.body[row * width + c] /= pivot;
        }
        self.body[row * width + col] = 1.0;
        for r in 0..self.rows {
            if r == row {
                continue;
            }
            let factor = self.at(r, col);
            if factor == 0.0 {
                continue;
            }
            for c in 0..width {
                let delta = factor * self.body[row * width + c];
                self.body[r * width + c] -= delta;
            }
            self.body[r * width + col] = 0.0;
        }
        let factor = self.reduced[col];
        for c in 0..self.cols {
            self.reduced[c] -= factor * self.body[row * width + c];
        }
        self.reduced[col] = 0.0;
        self.basis[row] = col;
    }

    fn solution(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.n);
        for (r, &var) in self.basis.iter().enumerate() {
            if var < self.n {
                v[var] = self.at(r, self.cols).clamp(0.0, self.upper[var]);
            }
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;

    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn box_sign_rule() {
        let p = Polytope::unit_box(2);
        assert_eq!(p.lmo(&v(&[-1.0, -1.0])).unwrap(), v(&[0.0, 0.0]));
        assert_eq!(p.lmo(&v(&[1.0, 0.0])).unwrap(), v(&[1.0, 0.0]));
    }

    #[test]
    fn halfspace_vertex() {
        let p = Polytope::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            v(&[1.0]),
            v(&[1.0, 1.0]),
        )
        .unwrap();
        assert_eq!(p.lmo(&v(&[2.0, 1.0])).unwrap(), v(&[1.0, 0.0]));
        assert_eq!(p.lmo(&v(&[1.0, 2.0])).unwrap(), v(&[0.0, 1.0]));
        // zero-coefficient coordinate stays at its lower bound
        assert_eq!(p.lmo(&v(&[0.0, 0.0])).unwrap(), v(&[0.0, 0.0]));
    }

    #[test]
    fn simplex_path_matches_box_rule_on_slack_constraints() {
        // A constraint that never binds must not change the answer.
        let p = Polytope::new(
            DMatrix::from_row_slice(1, 3, &[0.1, 0.1, 0.1]),
            v(&[10.0]),
            v(&[1.0, 2.0, 3.0]),
        )
        .unwrap();
        assert_eq!(p.lmo(&v(&[1.0, -1.0, 0.5])).unwrap(), v(&[1.0, 0.0, 3.0]));
    }
}
