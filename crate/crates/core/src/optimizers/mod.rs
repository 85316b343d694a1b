//! Projected gradient ascent, boosted PGA, stochastic continuous greedy and
//! SCG++, each producing a full per-iteration trajectory.

mod pga;
mod record;
mod scg;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DEFAULT_MAX_SWEEPS, DEFAULT_PROJECTION_TOL};
use crate::objectives::Objective;
use crate::oracle::{NoiseModel, OracleStream};

pub use pga::{boosted_gradient, boosted_gradient_at, boosted_sample, boosted_pga_run, pga_run};
pub use record::{write_battery_csv, write_returns_csv, Iterate, RunRecord};
pub use scg::{scg_run, scgpp_run};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Pga,
    BoostedPga,
    Scg,
    Scgpp,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Pga => "pga",
            Algorithm::BoostedPga => "boosted_pga",
            Algorithm::Scg => "scg",
            Algorithm::Scgpp => "scgpp",
        }
    }

    /// PGA variants certify the running average, greedy variants the final
    /// iterate.
    pub fn is_projected(&self) -> bool {
        matches!(self, Algorithm::Pga | Algorithm::BoostedPga)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pga" => Ok(Algorithm::Pga),
            "boosted_pga" => Ok(Algorithm::BoostedPga),
            "scg" => Ok(Algorithm::Scg),
            "scgpp" => Ok(Algorithm::Scgpp),
            other => Err(Error::invalid(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Ascent step for the projected methods.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepRule {
    Constant(f64),
    /// `η_t = c / √t`.
    Diminishing(f64),
}

impl StepRule {
    pub fn eta(&self, t: u64) -> f64 {
        match *self {
            StepRule::Constant(eta) => eta,
            StepRule::Diminishing(c) => c / (t as f64).sqrt(),
        }
    }
}

/// Momentum weight for SCG. `k` is the zero-based internal iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MomentumRule {
    /// `4 / (k + 8)^{2/3}`, equal to 1 at the first step.
    Poly48,
    /// `1 / (k + 1)^α`.
    Alpha(f64),
    /// Fixed weight, mainly for testing.
    Constant(f64),
}

impl MomentumRule {
    pub fn rho(&self, k: u64) -> f64 {
        match *self {
            MomentumRule::Poly48 => 4.0 / ((k + 8) as f64).cbrt().powi(2),
            MomentumRule::Alpha(alpha) => 1.0 / ((k + 1) as f64).powf(alpha),
            MomentumRule::Constant(rho) => rho,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitRule {
    /// Standard normal sample projected onto the polytope.
    GaussianProject,
    Zero,
}

/// How the boosted method picks the scaling point `s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoostSampling {
    InverseCdf,
    /// Always use this `s`; used to pin down the estimator in tests.
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnConvention {
    UniformRandomIterate,
    LastIterate,
    BestIterate,
}

impl ReturnConvention {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReturnConvention::UniformRandomIterate => "uniform_random_iterate",
            ReturnConvention::LastIterate => "last_iterate",
            ReturnConvention::BestIterate => "best_iterate",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub iterations: u64,
    pub step: StepRule,
    pub gamma: f64,
    pub boost_sampling: BoostSampling,
    pub momentum: MomentumRule,
    /// SCG++ mini-batch size; `None` means `T`.
    pub batch_size: Option<usize>,
    pub init: InitRule,
    pub returned: ReturnConvention,
    pub master_seed: u64,
    pub run_id: u64,
    /// Store every iterate; switch off for long batteries where only
    /// function values matter.
    pub keep_iterates: bool,
    pub projection_tol: f64,
    pub max_sweeps: usize,
}

impl RunConfig {
    /// Defaults: `η_t = 2/√t`, `γ = 1`, poly48 momentum, batch `T`,
    /// Gaussian-then-project start for PGA variants and zero otherwise,
    /// random-iterate return for PGA variants and last iterate otherwise.
    pub fn new(algorithm: Algorithm, iterations: u64) -> Self {
        let projected = algorithm.is_projected();
        Self {
            algorithm,
            iterations,
            step: StepRule::Diminishing(2.0),
            gamma: 1.0,
            boost_sampling: BoostSampling::InverseCdf,
            momentum: MomentumRule::Poly48,
            batch_size: None,
            init: if projected { InitRule::GaussianProject } else { InitRule::Zero },
            returned: if projected {
                ReturnConvention::UniformRandomIterate
            } else {
                ReturnConvention::LastIterate
            },
            master_seed: 0,
            run_id: 0,
            keep_iterates: true,
            projection_tol: DEFAULT_PROJECTION_TOL,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }

    pub fn with_run(mut self, master_seed: u64, run_id: u64) -> Self {
        self.master_seed = master_seed;
        self.run_id = run_id;
        self
    }

    pub fn batch(&self) -> usize {
        self.batch_size.unwrap_or(self.iterations as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("T must be at least 1"));
        }
        match self.step {
            StepRule::Constant(v) | StepRule::Diminishing(v) if !(v > 0.0 && v.is_finite()) => {
                return Err(Error::invalid(format!("step size must be positive, got {v}")));
            }
            _ => {}
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::invalid(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if let BoostSampling::Fixed(s) = self.boost_sampling {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::invalid(format!("fixed s must lie in [0, 1], got {s}")));
            }
        }
        match self.momentum {
            MomentumRule::Alpha(a) if !(a > 0.0 && a < 1.0) => {
                return Err(Error::invalid(format!("alpha must lie in (0, 1), got {a}")));
            }
            MomentumRule::Constant(r) if !(r > 0.0 && r <= 1.0) => {
                return Err(Error::invalid(format!("momentum must lie in (0, 1], got {r}")));
            }
            _ => {}
        }
        if self.batch() == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if !self.algorithm.is_projected() && self.init != InitRule::Zero {
            return Err(Error::invalid("greedy methods must start from the origin"));
        }
        Ok(())
    }
}

/// Run one trajectory, dispatching on the configured algorithm.
pub fn run<O: Objective + ?Sized>(objective: &O, noise: NoiseModel, cfg: &RunConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let mut oracle = OracleStream::new(objective, noise, cfg.master_seed, cfg.run_id);
    match cfg.algorithm {
        Algorithm::Pga => pga_run(&mut oracle, cfg),
        Algorithm::BoostedPga => boosted_pga_run(&mut oracle, cfg),
        Algorithm::Scg => scg_run(&mut oracle, cfg),
        Algorithm::Scgpp => scgpp_run(&mut oracle, cfg),
    }
}

/// Run ids `0..runs` concurrently on `threads` workers (0 picks the
/// default). Records come back sorted by run id; the first failing run id
/// is reported.
pub fn run_battery<O: Objective + ?Sized>(
    objective: &O,
    noise: NoiseModel,
    template: &RunConfig,
    runs: u64,
    threads: usize,
) -> Result<Vec<RunRecord>> {
    template.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let results: Vec<Result<RunRecord>> = pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|id| {
                let mut cfg = template.clone();
                cfg.run_id = id;
                run(objective, noise, &cfg)
            })
            .collect()
    });
    results.into_iter().collect()
}
