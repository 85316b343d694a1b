//! Monotone DR-submodular quadratic programs `f(x) = ½ xᵀHx + hᵀx`.
//!
//! `H` is symmetric with non-positive entries and `h = -H u`, so the
//! gradient `H(x - u)` is non-negative everywhere below `u`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::Objective;
use crate::bounds::spectral_norm;
use crate::error::{check_dim, Error, Result};
use crate::geometry::{Polytope, PolytopeFile};

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct NqpObjective {
    h_matrix: DMatrix<f64>,
    h_vector: DVector<f64>,
    polytope: Polytope,
}

impl NqpObjective {
    pub fn new(h_matrix: DMatrix<f64>, polytope: Polytope) -> Result<Self> {
        let n = polytope.dim();
        if h_matrix.nrows() != n || h_matrix.ncols() != n {
            return Err(Error::invalid(format!(
                "H is {}x{} but the polytope has dimension {n}",
                h_matrix.nrows(),
                h_matrix.ncols()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let hij = h_matrix[(i, j)];
                if !hij.is_finite() || hij > 0.0 {
                    return Err(Error::invalid(format!(
                        "H[{i},{j}] = {hij} must be finite and non-positive"
                    )));
                }
                if (hij - h_matrix[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::invalid(format!("H is not symmetric at ({i},{j})")));
                }
            }
        }
        let h_vector = -(&h_matrix * polytope.upper());
        Ok(Self {
            h_matrix,
            h_vector,
            polytope,
        })
    }

    pub fn h_matrix(&self) -> &DMatrix<f64> {
        &self.h_matrix
    }

    pub fn h_vector(&self) -> &DVector<f64> {
        &self.h_vector
    }

    pub fn to_toml_string(&self) -> String {
        let p = PolytopeFile::from(&self.polytope);
        let file = NqpFile {
            n: p.n,
            m: p.m,
            a: p.a,
            b: p.b,
            u: p.u,
            h: self
                .h_matrix
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
        };
        toml::to_string(&file).expect("NQP instance serializes")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: NqpFile =
            toml::from_str(text).map_err(|e| Error::invalid(format!("NQP instance: {e}")))?;
        let n = file.n;
        if file.h.len() != n || file.h.iter().any(|r| r.len() != n) {
            return Err(Error::invalid(format!("H must be {n}x{n}")));
        }
        let h = DMatrix::from_fn(n, n, |i, j| file.h[i][j]);
        let polytope = PolytopeFile {
            n,
            m: file.m,
            a: file.a,
            b: file.b,
            u: file.u,
        };
        Self::new(h, polytope.try_into()?)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NqpFile {
    n: usize,
    m: usize,
    #[serde(rename = "A", default)]
    a: Vec<Vec<f64>>,
    #[serde(default)]
    b: Vec<f64>,
    u: Vec<f64>,
    #[serde(rename = "H")]
    h: Vec<Vec<f64>>,
}

impl Objective for NqpObjective {
    fn dim(&self) -> usize {
        self.polytope.dim()
    }

    fn polytope(&self) -> &Polytope {
        &self.polytope
    }

    fn value(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(0.5 * x.dot(&(&self.h_matrix * x)) + self.h_vector.dot(x))
    }

    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(&self.h_matrix * x + &self.h_vector)
    }

    fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(self.dim(), x.len())?;
        Ok(self.h_matrix.clone())
    }

    fn smoothness_bound(&self) -> Result<f64> {
        spectral_norm(&self.h_matrix)
    }
}

/// How the constraint matrix `A` of a generated instance is filled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConstraintFill {
    /// i.i.d. Uniform[0, 1] entries.
    Uniform,
    /// Every entry equal to the given value.
    Constant(f64),
}

/// Seeded generator for random NQP instances with `u = 1` and `b = 1`.
#[derive(Clone, Debug)]
pub struct NqpGenerator {
    pub n: usize,
    pub m: usize,
    pub entry_low: f64,
    pub entry_high: f64,
    pub fill: ConstraintFill,
}

impl NqpGenerator {
    pub fn new(n: usize, m: usize, entry_low: f64, entry_high: f64) -> Self {
        Self {
            n,
            m,
            entry_low,
            entry_high,
            fill: ConstraintFill::Uniform,
        }
    }

    pub fn with_fill(mut self, fill: ConstraintFill) -> Self {
        self.fill = fill;
        self
    }

    pub fn generate(&self, seed: u64) -> Result<NqpObjective> {
        if self.entry_high > 0.0 {
            return Err(Error::invalid("entry_high must be ≤ 0"));
        }
        if !self.entry_low.is_finite() || self.entry_low > self.entry_high {
            return Err(Error::invalid("entry_low must be finite and <= entry_high"));
        }
        if self.n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if let ConstraintFill::Constant(c) = self.fill {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::invalid("constant constraint entries must be non-negative"));
            }
        }

        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let n = self.n;
        let span = self.entry_high - self.entry_low;
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let value = self.entry_low + span * rng.random::<f64>();
                h[(i, j)] = value;
                h[(j, i)] = value;
            }
        }
        let a = match self.fill {
            ConstraintFill::Uniform => DMatrix::from_fn(self.m, n, |_, _| rng.random::<f64>()),
            ConstraintFill::Constant(c) => DMatrix::from_element(self.m, n, c),
        };
        let polytope = Polytope::new(
            a,
            DVector::from_element(self.m, 1.0),
            DVector::from_element(n, 1.0),
        )?;
        NqpObjective::new(h, polytope)
    }
}
