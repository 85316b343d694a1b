//! Seeded stochastic gradient and Hessian oracles.
//!
//! Each run owns an [`OracleStream`]: a ChaCha20 generator keyed by the
//! master seed, with the run id selecting ChaCha's 64-bit stream counter.
//! Runs therefore draw from disjoint, reproducible substreams no matter how
//! they are scheduled.
//!
//! Stream contract, per call:
//! - a uniform draw consumes one `u64` (53-bit mantissa, range `[0, 1)`);
//! - a Gaussian draw consumes exactly two uniforms (Box–Muller, cosine branch
//!   only, nothing cached);
//! - `noisy_grad` draws `n` Gaussians unless the model is `None`;
//! - `noisy_hessian` draws `n(n+1)/2` Gaussians (upper triangle, row-major)
//!   when `hessian_sigma > 0`, otherwise none.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::objectives::Objective;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseKind {
    None,
    /// Per-coordinate `N(0, (scale·‖∇F(x)‖/n)²)`.
    GaussianProp { scale: f64 },
    /// Per-coordinate `N(0, σ²)`.
    GaussianFixed { sigma: f64 },
    /// Per-coordinate `clip(N(0, σ²), −2σ, 2σ)`.
    ClippedGaussian { sigma: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// Standard deviation of the symmetric Hessian perturbation.
    pub hessian_sigma: f64,
}

/// `(M, σ)` as consumed by the bounds. `noise_bound` is infinite when the
/// noise is not almost surely bounded.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseConstants {
    pub noise_bound: f64,
    pub sigma: f64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            hessian_sigma: 0.0,
        }
    }

    /// Model with the default Hessian noise: one tenth of the gradient scale.
    pub fn new(kind: NoiseKind) -> Self {
        let hessian_sigma = match kind {
            NoiseKind::None => 0.0,
            NoiseKind::GaussianProp { scale } => scale / 10.0,
            NoiseKind::GaussianFixed { sigma } | NoiseKind::ClippedGaussian { sigma } => sigma / 10.0,
        };
        Self {
            kind,
            hessian_sigma,
        }
    }

    pub fn with_hessian_sigma(mut self, hessian_sigma: f64) -> Self {
        self.hessian_sigma = hessian_sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let param = match self.kind {
            NoiseKind::None => 0.0,
            NoiseKind::GaussianProp { scale } => scale,
            NoiseKind::GaussianFixed { sigma } | NoiseKind::ClippedGaussian { sigma } => sigma,
        };
        if !(param >= 0.0 && param.is_finite()) {
            return Err(Error::invalid(format!("noise parameter {param} must be non-negative")));
        }
        if !(self.hessian_sigma >= 0.0 && self.hessian_sigma.is_finite()) {
            return Err(Error::invalid("hessian_sigma must be non-negative"));
        }
        Ok(())
    }

    /// Noise constants in dimension `n`. Proportional noise has a
    /// state-dependent scale and needs a gradient-norm bound `g_max`.
    pub fn constants(&self, n: usize, g_max: Option<f64>) -> Result<NoiseConstants> {
        let root_n = (n as f64).sqrt();
        Ok(match self.kind {
            NoiseKind::None => NoiseConstants {
                noise_bound: 0.0,
                sigma: 0.0,
            },
            NoiseKind::ClippedGaussian { sigma } => NoiseConstants {
                noise_bound: 2.0 * sigma * root_n,
                sigma: sigma * root_n,
            },
            NoiseKind::GaussianFixed { sigma } => NoiseConstants {
                noise_bound: f64::INFINITY,
                sigma: sigma * root_n,
            },
            NoiseKind::GaussianProp { scale } => {
                let g_max = g_max.ok_or_else(|| {
                    Error::MissingConstant("state-dependent noise: supply G_max".into())
                })?;
                NoiseConstants {
                    noise_bound: f64::INFINITY,
                    sigma: scale * g_max / root_n,
                }
            }
        })
    }
}

/// Generator for run `run_id` under `master_seed`.
pub fn run_rng(master_seed: u64, run_id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(run_id);
    rng
}

/// One Box–Muller draw from two uniforms.
pub fn standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// A run's view of the objective through a noisy oracle, plus the run's
/// random stream for algorithm-side sampling.
pub struct OracleStream<'a, O: Objective + ?Sized> {
    objective: &'a O,
    noise: NoiseModel,
    rng: ChaCha20Rng,
}

impl<'a, O: Objective + ?Sized> OracleStream<'a, O> {
    pub fn new(objective: &'a O, noise: NoiseModel, master_seed: u64, run_id: u64) -> Self {
        Self {
            objective,
            noise,
            rng: run_rng(master_seed, run_id),
        }
    }

    pub fn objective(&self) -> &'a O {
        self.objective
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn standard_normal(&mut self) -> f64 {
        standard_normal(&mut self.rng)
    }

    /// Uniform index in `0..len` (one `u64` draw).
    pub fn index(&mut self, len: usize) -> usize {
        self.rng.random_range(0..len)
    }

    /// `∇F(x) + z` with `z` drawn from the noise model.
    pub fn noisy_grad(&mut self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let mut g = self.objective.gradient(x)?;
        let n = g.len() as f64;
        match self.noise.kind {
            NoiseKind::None => {}
            NoiseKind::GaussianFixed { sigma } => {
                for gi in g.iter_mut() {
                    *gi += sigma * standard_normal(&mut self.rng);
                }
            }
            NoiseKind::ClippedGaussian { sigma } => {
                for gi in g.iter_mut() {
                    let z = sigma * standard_normal(&mut self.rng);
                    *gi += z.clamp(-2.0 * sigma, 2.0 * sigma);
                }
            }
            NoiseKind::GaussianProp { scale } => {
                let sd = scale * g.norm() / n;
                for gi in g.iter_mut() {
                    *gi += sd * standard_normal(&mut self.rng);
                }
            }
        }
        Ok(g)
    }

    /// `∇²F(x) + Z` with `Z` symmetric, upper triangle i.i.d.
    /// `N(0, hessian_sigma²)`.
    pub fn noisy_hessian(&mut self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let mut h = self.objective.hessian(x)?;
        let sd = self.noise.hessian_sigma;
        if sd > 0.0 {
            let n = h.nrows();
            for i in 0..n {
                for j in i..n {
                    let z = sd * standard_normal(&mut self.rng);
                    h[(i, j)] += z;
                    if i != j {
                        h[(j, i)] += z;
                    }
                }
            }
        }
        Ok(h)
    }
}
