//! Benchmark DR-submodular objectives with exact value, gradient and Hessian.

mod budget;
mod nqp;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::geometry::Polytope;

pub use budget::{
    load_bipartite, parse_bipartite, synthetic_bipartite, write_bipartite_tsv,
    BudgetAllocationObjective, BudgetOptions, Edge, FrequencyEdge, FrequencyMapping,
    SyntheticBipartite,
};
pub use nqp::{ConstraintFill, NqpGenerator, NqpObjective};

/// A deterministic objective `F` over a polytope. Noise is layered on top by
/// [`crate::oracle::OracleStream`].
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn polytope(&self) -> &Polytope;

    fn value(&self, x: &DVector<f64>) -> Result<f64>;

    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>>;

    fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;

    /// Upper bound on `‖∇²F(x)‖₂` over the feasible region.
    fn smoothness_bound(&self) -> Result<f64>;
}

/// Either benchmark family, for code that picks the problem at runtime.
#[derive(Clone, Debug)]
pub enum Problem {
    Nqp(NqpObjective),
    Budget(BudgetAllocationObjective),
}

impl Problem {
    fn inner(&self) -> &dyn Objective {
        match self {
            Problem::Nqp(o) => o,
            Problem::Budget(o) => o,
        }
    }
}

impl Objective for Problem {
    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn polytope(&self) -> &Polytope {
        self.inner().polytope()
    }

    fn value(&self, x: &DVector<f64>) -> Result<f64> {
        self.inner().value(x)
    }

    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.inner().gradient(x)
    }

    fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.inner().hessian(x)
    }

    fn smoothness_bound(&self) -> Result<f64> {
        self.inner().smoothness_bound()
    }
}
