//! Down-closed polytopes `{x : Ax <= b, 0 <= x <= u}` and their two oracles.
//!
//! [`Polytope::project`] is Euclidean projection (used by the projected
//! gradient methods) and [`Polytope::lmo`] is linear maximization (the
//! Frank-Wolfe direction finder). Pure boxes (`m = 0`) take closed-form
//! paths in both.

mod projection;
mod simplex;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub use projection::{DEFAULT_MAX_SWEEPS, DEFAULT_PROJECTION_TOL};
pub use simplex::LP_TOL;

#[derive(Clone, Debug, PartialEq)]
pub struct Polytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
    upper: DVector<f64>,
}

impl Polytope {
    /// Builds `{x : a x <= b, 0 <= x <= upper}`.
    ///
    /// Every `b[i]` and `upper[j]` must be strictly positive so the origin is
    /// strictly feasible.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        let n = upper.len();
        if n == 0 {
            return Err(Error::invalid("polytope dimension must be at least 1"));
        }
        if a.nrows() != b.len() {
            return Err(Error::invalid(format!(
                "A has {} rows but b has {} entries",
                a.nrows(),
                b.len()
            )));
        }
        if a.nrows() > 0 && a.ncols() != n {
            return Err(Error::invalid(format!(
                "A has {} columns but u has {} entries",
                a.ncols(),
                n
            )));
        }
        if let Some(j) = upper.iter().position(|&u| !(u > 0.0 && u.is_finite())) {
            return Err(Error::invalid(format!(
                "upper bound u[{j}] = {} must be positive and finite",
                upper[j]
            )));
        }
        if let Some(i) = b.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!(
                "right-hand side b[{i}] = {} must be positive and finite",
                b[i]
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("A contains a non-finite entry"));
        }
        // Normalize the empty constraint block to shape 0 x n.
        let a = if a.nrows() == 0 {
            DMatrix::zeros(0, n)
        } else {
            a
        };
        Ok(Self { a, b, upper })
    }

    /// The box `[0, upper]` with no halfspace constraints.
    pub fn unit_box(n: usize) -> Self {
        Self::boxed(DVector::from_element(n, 1.0)).expect("unit box is valid")
    }

    pub fn boxed(upper: DVector<f64>) -> Result<Self> {
        let n = upper.len();
        Self::new(DMatrix::zeros(0, n), DVector::zeros(0), upper)
    }

    pub fn dim(&self) -> usize {
        self.upper.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn is_box(&self) -> bool {
        self.a.nrows() == 0
    }

    /// True iff `-tol <= x <= u + tol` and `Ax <= b + tol` componentwise.
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        if tol < 0.0 {
            return Err(Error::invalid("tolerance must be non-negative"));
        }
        Ok(self.max_violation(x) <= tol)
    }

    /// Largest amount by which any box or halfspace constraint is violated.
    pub(crate) fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let box_viol = x
            .iter()
            .zip(self.upper.iter())
            .map(|(&xj, &uj)| (-xj).max(xj - uj))
            .fold(0.0_f64, f64::max);
        let half_viol = (0..self.a.nrows())
            .map(|i| self.a.row(i).dot(&x.transpose()) - self.b[i])
            .fold(0.0_f64, f64::max);
        box_viol.max(half_viol)
    }

    /// `‖u‖₂`, an upper bound on the diameter since the region sits inside `[0, u]`.
    pub fn diameter_bound(&self) -> f64 {
        self.upper.norm()
    }

    /// Componentwise clamp onto `[0, u]`.
    pub fn clamp_to_box(&self, y: &DVector<f64>) -> DVector<f64> {
        y.zip_map(&self.upper, |v, u| v.clamp(0.0, u))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&PolytopeFile::from(self)).expect("polytope serializes")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: PolytopeFile =
            toml::from_str(text).map_err(|e| Error::invalid(format!("polytope: {e}")))?;
        file.try_into()
    }
}

/// On-disk layout shared by polytope and NQP instance files.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct PolytopeFile {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "A", default)]
    pub a: Vec<Vec<f64>>,
    #[serde(default)]
    pub b: Vec<f64>,
    pub u: Vec<f64>,
}

impl From<&Polytope> for PolytopeFile {
    fn from(p: &Polytope) -> Self {
        Self {
            n: p.dim(),
            m: p.num_constraints(),
            a: p
                .a
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            b: p.b.iter().copied().collect(),
            u: p.upper.iter().copied().collect(),
        }
    }
}

impl TryFrom<PolytopeFile> for Polytope {
    type Error = Error;

    fn try_from(f: PolytopeFile) -> Result<Self> {
        if f.u.len() != f.n {
            return Err(Error::invalid(format!(
                "u has {} entries but n = {}",
                f.u.len(),
                f.n
            )));
        }
        if f.a.len() != f.m || f.b.len() != f.m {
            return Err(Error::invalid(format!(
                "expected {} rows of A and entries of b, found {} and {}",
                f.m,
                f.a.len(),
                f.b.len()
            )));
        }
        if let Some(i) = f.a.iter().position(|row| row.len() != f.n) {
            return Err(Error::invalid(format!("row {i} of A does not have n = {} entries", f.n)));
        }
        let a = DMatrix::from_fn(f.m, f.n, |i, j| f.a[i][j]);
        Polytope::new(a, DVector::from_vec(f.b), DVector::from_vec(f.u))
    }
}
