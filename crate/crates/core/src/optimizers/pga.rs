use nalgebra::DVector;

use super::record::Recorder;
use super::{BoostSampling, InitRule, RunConfig, RunRecord};
use crate::error::Result;
use crate::objectives::Objective;
use crate::oracle::OracleStream;

/// Inverse CDF of the density `∝ e^{γ(s-1)}` on `[0, 1]` at `u`.
pub fn boosted_sample(u: f64, gamma: f64) -> f64 {
    let s = 1.0 + ((-gamma).exp() + u * (-(-gamma).exp_m1())).ln() / gamma;
    s.clamp(0.0, 1.0)
}

/// `(1 - e^{-γ})/γ · g̃(s·x)` at a given `s`.
pub fn boosted_gradient_at<O: Objective + ?Sized>(
    oracle: &mut OracleStream<'_, O>,
    x: &DVector<f64>,
    s: f64,
    gamma: f64,
) -> Result<DVector<f64>> {
    let scale = -(-gamma).exp_m1() / gamma;
    Ok(oracle.noisy_grad(&(x * s))? * scale)
}

/// Unbiased estimate of the auxiliary gradient: draws `s` by inverse CDF
/// (one uniform), then queries the base oracle at `s·x`.
pub fn boosted_gradient<O: Objective + ?Sized>(
    oracle: &mut OracleStream<'_, O>,
    x: &DVector<f64>,
    gamma: f64,
) -> Result<DVector<f64>> {
    let s = boosted_sample(oracle.uniform(), gamma);
    boosted_gradient_at(oracle, x, s, gamma)
}

fn initial_point<O: Objective + ?Sized>(oracle: &mut OracleStream<'_, O>, cfg: &RunConfig) -> Result<DVector<f64>> {
    let polytope = oracle.objective().polytope();
    let n = polytope.dim();
    match cfg.init {
        InitRule::Zero => Ok(DVector::zeros(n)),
        InitRule::GaussianProject => {
            let y = DVector::from_iterator(n, (0..n).map(|_| oracle.standard_normal()));
            polytope.project(&y, cfg.projection_tol, cfg.max_sweeps)
        }
    }
}

fn projected_ascent<O, G>(oracle: &mut OracleStream<'_, O>, cfg: &RunConfig, mut direction: G) -> Result<RunRecord>
where
    O: Objective + ?Sized,
    G: FnMut(&mut OracleStream<'_, O>, &DVector<f64>) -> Result<DVector<f64>>,
{
    let objective = oracle.objective();
    let polytope = objective.polytope();
    let mut x = initial_point(oracle, cfg)?;
    let mut rec = Recorder::new(cfg);
    for t in 1..=cfg.iterations {
        let g = direction(oracle, &x)?;
        let y = &x + g * cfg.step.eta(t);
        x = polytope.project(&y, cfg.projection_tol, cfg.max_sweeps)?;
        rec.push(objective, &x)?;
    }
    Ok(rec.finish(oracle, cfg))
}

/// `x_t = P(x_{t-1} + η_t g̃(x_{t-1}))` for `t = 1..T`.
pub fn pga_run<O: Objective + ?Sized>(oracle: &mut OracleStream<'_, O>, cfg: &RunConfig) -> Result<RunRecord> {
    projected_ascent(oracle, cfg, |o, x| o.noisy_grad(x))
}

/// PGA driven by the boosted estimator.
pub fn boosted_pga_run<O: Objective + ?Sized>(oracle: &mut OracleStream<'_, O>, cfg: &RunConfig) -> Result<RunRecord> {
    let gamma = cfg.gamma;
    match cfg.boost_sampling {
        BoostSampling::InverseCdf => projected_ascent(oracle, cfg, |o, x| boosted_gradient(o, x, gamma)),
        BoostSampling::Fixed(s) => projected_ascent(oracle, cfg, |o, x| boosted_gradient_at(o, x, s, gamma)),
    }
}
