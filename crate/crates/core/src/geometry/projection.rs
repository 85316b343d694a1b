use nalgebra::DVector;

use super::Polytope;
use crate::error::{check_dim, Error, Result};

pub const DEFAULT_PROJECTION_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_SWEEPS: usize = 10_000;

impl Polytope {
    /// Euclidean projection onto the polytope.
    ///
    /// Feasible inputs (at zero tolerance) are returned unchanged. Pure boxes
    /// are clamped. Otherwise Dykstra's alternating projections cycle over
    /// the halfspaces and finish each sweep on the box, so the result always
    /// lies in `[0, u]` and the halfspaces hold to within `tol`.
    pub fn project(&self, y: &DVector<f64>, tol: f64, max_sweeps: usize) -> Result<DVector<f64>> {
        check_dim(self.dim(), y.len())?;
        if self.max_violation(y) <= 0.0 {
            return Ok(y.clone());
        }
        if self.is_box() {
            return Ok(self.clamp_to_box(y));
        }

        let m = self.num_constraints();
        let n = self.dim();
        let rows: Vec<DVector<f64>> = (0..m).map(|i| self.a.row(i).transpose()).collect();
        let row_norms: Vec<f64> = rows.iter().map(|r| r.norm_squared()).collect();

        let mut x = y.clone();
        let mut corrections = vec![DVector::<f64>::zeros(n); m + 1];
        let mut residual = f64::INFINITY;

        for _ in 0..max_sweeps {
            let previous = x.clone();
            for i in 0..m {
                let z = &x + &corrections[i];
                let projected = if row_norms[i] > 0.0 {
                    let excess = rows[i].dot(&z) - self.b[i];
                    if excess > 0.0 {
                        &z - &rows[i] * (excess / row_norms[i])
                    } else {
                        z.clone()
                    }
                } else {
                    z.clone()
                };
                corrections[i] = z - &projected;
                x = projected;
            }
            let z = &x + &corrections[m];
            let projected = self.clamp_to_box(&z);
            corrections[m] = z - &projected;
            x = projected;

            residual = (&x - &previous).norm();
            if residual <= tol && self.max_violation(&x) <= tol {
                return Ok(x);
            }
        }

        Err(Error::ProjectionDiverged {
            sweeps: max_sweeps,
            residual,
            last: x.iter().copied().collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;

    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    fn corner() -> Polytope {
        Polytope::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            v(&[1.0]),
            v(&[1.0, 1.0]),
        )
        .unwrap()
    }

    #[test]
    fn feasible_point_is_fixed() {
        let p = Polytope::unit_box(1);
        let y = v(&[0.5]);
        assert_eq!(p.project(&y, 1e-8, 100).unwrap(), y);
        let y = v(&[0.25, 0.5]);
        assert_eq!(corner().project(&y, 1e-8, 100).unwrap(), y);
    }

    #[test]
    fn box_is_clamped() {
        let p = Polytope::unit_box(2);
        assert_eq!(p.project(&v(&[2.0, -1.0]), 1e-8, 100).unwrap(), v(&[1.0, 0.0]));
    }

    #[test]
    fn halfspace_corner() {
        let x = corner()
            .project(&v(&[1.0, 1.0]), DEFAULT_PROJECTION_TOL, DEFAULT_MAX_SWEEPS)
            .unwrap();
        assert!((x[0] - 0.5).abs() < 1e-8 && (x[1] - 0.5).abs() < 1e-8, "{x}");
    }

    #[test]
    fn divergence_reports_last_iterate() {
        // Two nearly parallel halfspaces converge slowly; one sweep is not enough.
        let p = Polytope::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.001]),
            v(&[1.0, 1.0]),
            v(&[5.0, 5.0]),
        )
        .unwrap();
        match p.project(&v(&[5.0, 0.0]), 1e-14, 1) {
            Err(Error::ProjectionDiverged { sweeps, last, .. }) => {
                assert_eq!(sweeps, 1);
                assert_eq!(last.len(), 2);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
