use nalgebra::{DMatrix, DVector};

use super::record::Recorder;
use super::{RunConfig, RunRecord};
use crate::error::Result;
use crate::objectives::Objective;
use crate::oracle::OracleStream;

/// Momentum-averaged Frank-Wolfe with step `1/T` from the origin.
pub fn scg_run<O: Objective + ?Sized>(oracle: &mut OracleStream<'_, O>, cfg: &RunConfig) -> Result<RunRecord> {
    let objective = oracle.objective();
    let polytope = objective.polytope();
    let n = polytope.dim();
    let step = 1.0 / cfg.iterations as f64;
    let mut x = DVector::zeros(n);
    let mut g_bar = DVector::zeros(n);
    let mut rec = Recorder::new(cfg);
    for k in 0..cfg.iterations {
        let rho = cfg.momentum.rho(k);
        let g = oracle.noisy_grad(&x)?;
        g_bar = g_bar * (1.0 - rho) + g * rho;
        let v = polytope.lmo(&g_bar)?;
        x += v * step;
        rec.push(objective, &x)?;
    }
    Ok(rec.finish(oracle, cfg))
}

/// Frank-Wolfe on a path-integrated gradient estimate: a mini-batch
/// gradient at the origin, then Hessian-vector corrections along the
/// segment between consecutive iterates.
pub fn scgpp_run<O: Objective + ?Sized>(oracle: &mut OracleStream<'_, O>, cfg: &RunConfig) -> Result<RunRecord> {
    let objective = oracle.objective();
    let polytope = objective.polytope();
    let n = polytope.dim();
    let batch = cfg.batch();
    let step = 1.0 / cfg.iterations as f64;
    let mut x_prev = DVector::zeros(n);
    let mut x = DVector::zeros(n);
    let mut g_hat = DVector::zeros(n);
    let mut rec = Recorder::new(cfg);
    for k in 0..cfg.iterations {
        if k == 0 {
            for _ in 0..batch {
                g_hat += oracle.noisy_grad(&x)?;
            }
            g_hat /= batch as f64;
        } else {
            let mut h_bar = DMatrix::zeros(n, n);
            for _ in 0..batch {
                let a = oracle.uniform();
                let xa = &x * a + &x_prev * (1.0 - a);
                h_bar += oracle.noisy_hessian(&xa)?;
            }
            h_bar /= batch as f64;
            g_hat += h_bar * (&x - &x_prev);
        }
        let v = polytope.lmo(&g_hat)?;
        x_prev.copy_from(&x);
        x += v * step;
        rec.push(objective, &x)?;
    }
    Ok(rec.finish(oracle, cfg))
}
