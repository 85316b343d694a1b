//! Experiment configuration: one TOML file, with `--set key.path=value`
//! overrides applied to the raw table before validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::{BoostedSmoothness, Confidence, ScgppExponent, Theorem};
use crate::error::{Error, Result};
use crate::objectives::{
    load_bipartite, synthetic_bipartite, BudgetAllocationObjective, BudgetOptions, ConstraintFill,
    FrequencyMapping, NqpGenerator, NqpObjective, Problem, SyntheticBipartite,
};
use crate::optimizers::{
    Algorithm, BoostSampling, InitRule, MomentumRule, ReturnConvention, RunConfig, StepRule,
};
use crate::oracle::{NoiseKind, NoiseModel};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub runs: u64,
    pub iterations: u64,
    /// Worker threads; 0 uses the available parallelism.
    #[serde(default)]
    pub threads: usize,
    pub output_dir: PathBuf,
    pub problem: ProblemSpec,
    pub algorithm: AlgorithmSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub opt: OptSpec,
    #[serde(default)]
    pub constants: ConstantOverrides,
    #[serde(default)]
    pub bounds: Vec<BoundSpec>,
    #[serde(default)]
    pub report: ReportSpec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    NqpGenerate,
    NqpFile,
    BudgetFile,
    BudgetSynthetic,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    // nqp-generate
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub low: Option<f64>,
    pub high: Option<f64>,
    /// Fill every constraint entry with this value instead of Uniform[0, 1].
    pub constraint_value: Option<f64>,
    pub seed: Option<u64>,
    // nqp-file, budget-file
    pub path: Option<PathBuf>,
    // budget-*
    pub mapping: Option<String>,
    pub linear_cap: Option<f64>,
    pub advertisers: Option<usize>,
    pub upper: Option<f64>,
    // budget-synthetic
    pub channels: Option<usize>,
    pub customers: Option<usize>,
    pub density: Option<f64>,
    pub max_frequency: Option<u32>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub name: Algorithm,
    /// `diminishing` (η_t = eta/√t) or `constant`.
    pub step: Option<String>,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    /// `poly48` or `alpha`.
    pub momentum: Option<String>,
    pub alpha: Option<f64>,
    pub batch_size: Option<usize>,
    /// `gaussian_project` or `zero`.
    pub init: Option<String>,
    pub returned: Option<ReturnConvention>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// `none`, `gaussian_prop`, `gaussian_fixed` or `clipped_gaussian`.
    pub kind: Option<String>,
    pub sigma: Option<f64>,
    pub scale: Option<f64>,
    pub hessian_sigma: Option<f64>,
    /// Gradient-norm bound for proportional noise constants.
    pub g_max: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptSpec {
    /// Known optimum; skips the approximation when set.
    pub value: Option<f64>,
    pub runs: u64,
    pub iterations: u64,
    /// Seed for the approximation runs; defaults to a fixed offset from
    /// `master_seed` so they do not replay the battery.
    pub seed: Option<u64>,
    /// Run the approximation without noise.
    pub noise_free: bool,
}

impl Default for OptSpec {
    fn default() -> Self {
        Self {
            value: None,
            runs: 100,
            iterations: 5000,
            seed: None,
            noise_free: false,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantOverrides {
    pub lipschitz: Option<f64>,
    pub diameter: Option<f64>,
    pub noise_bound: Option<f64>,
    pub sigma: Option<f64>,
    pub grad0_norm: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSpec {
    pub theorem: u8,
    pub delta: Option<f64>,
    /// Target success probability for the Chebyshev-style bounds.
    pub probability: Option<f64>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    /// `derived` or `stated`.
    pub smoothness: Option<String>,
    /// `linear` or `quadratic`.
    pub exponent: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSpec {
    pub statistics: Vec<String>,
    pub p: f64,
    pub t_min: u64,
    pub normalized: bool,
    /// `auto`, `f_true` or `f_running_avg`.
    pub series: String,
}

impl Default for ReportSpec {
    fn default() -> Self {
        Self {
            statistics: vec!["min".into(), "median".into(), "q90".into()],
            p: 0.5,
            t_min: 1,
            normalized: true,
            series: "auto".into(),
        }
    }
}

/// Sets `key.path = value` in a TOML table. The value is parsed as a TOML
/// literal and falls back to a plain string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::invalid(format!("override '{assignment}' is not key=value")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {}", raw.trim()))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::invalid(format!("bad override key '{key}'")));
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::invalid(format!("override key '{key}' crosses a non-table value")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, overrides, path.parent())
    }

    /// Parses and validates; relative paths resolve against `base`.
    pub fn parse(text: &str, overrides: &[String], base: Option<&Path>) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::invalid(format!("config: {e}")))?;
        if let Some(base) = base.filter(|b| !b.as_os_str().is_empty()) {
            let resolve = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            };
            resolve(&mut cfg.output_dir);
            if let Some(p) = cfg.problem.path.as_mut() {
                resolve(p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::invalid("runs must be at least 1"));
        }
        self.run_config()?.validate()?;
        self.noise_model()?.validate()?;
        for b in &self.bounds {
            b.theorem(self.algorithm.gamma.unwrap_or(1.0))?.validate()?;
        }
        if self.opt.runs == 0 || self.opt.iterations == 0 {
            return Err(Error::invalid("opt.runs and opt.iterations must be positive"));
        }
        if let Some(v) = self.opt.value {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid("opt.value must be positive"));
            }
        }
        if !(self.report.p > 0.0 && self.report.p.is_finite()) {
            return Err(Error::invalid("report.p must be positive"));
        }
        for s in &self.report.statistics {
            crate::analysis::Statistic::parse(s)?;
        }
        self.series()?;
        Ok(())
    }

    /// Run template with `run_id = 0`.
    pub fn run_config(&self) -> Result<RunConfig> {
        let a = &self.algorithm;
        let mut cfg = RunConfig::new(a.name, self.iterations).with_run(self.master_seed, 0);
        let eta = a.eta.unwrap_or(2.0);
        cfg.step = match a.step.as_deref().unwrap_or("diminishing") {
            "diminishing" => StepRule::Diminishing(eta),
            "constant" => StepRule::Constant(eta),
            other => return Err(Error::invalid(format!("unknown step rule '{other}'"))),
        };
        cfg.gamma = a.gamma.unwrap_or(1.0);
        cfg.boost_sampling = BoostSampling::InverseCdf;
        cfg.momentum = match a.momentum.as_deref().unwrap_or("poly48") {
            "poly48" => MomentumRule::Poly48,
            "alpha" => MomentumRule::Alpha(
                a.alpha.ok_or_else(|| Error::invalid("momentum = \"alpha\" needs algorithm.alpha"))?,
            ),
            other => return Err(Error::invalid(format!("unknown momentum rule '{other}'"))),
        };
        cfg.batch_size = a.batch_size;
        if let Some(init) = a.init.as_deref() {
            cfg.init = match init {
                "gaussian_project" => InitRule::GaussianProject,
                "zero" => InitRule::Zero,
                other => return Err(Error::invalid(format!("unknown init rule '{other}'"))),
            };
        }
        if let Some(r) = a.returned {
            cfg.returned = r;
        }
        Ok(cfg)
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        let n = &self.noise;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::invalid(format!("noise kind needs noise.{name}")))
        };
        let kind = match n.kind.as_deref().unwrap_or("none") {
            "none" => NoiseKind::None,
            "gaussian_prop" => NoiseKind::GaussianProp {
                scale: n.scale.unwrap_or(1.0),
            },
            "gaussian_fixed" => NoiseKind::GaussianFixed {
                sigma: need(n.sigma, "sigma")?,
            },
            "clipped_gaussian" => NoiseKind::ClippedGaussian {
                sigma: need(n.sigma, "sigma")?,
            },
            other => return Err(Error::invalid(format!("unknown noise kind '{other}'"))),
        };
        let mut model = NoiseModel::new(kind);
        if let Some(h) = n.hessian_sigma {
            model = model.with_hessian_sigma(h);
        }
        Ok(model)
    }

    pub fn series(&self) -> Result<crate::analysis::Series> {
        use crate::analysis::Series;
        Ok(match self.report.series.as_str() {
            "auto" if self.algorithm.name.is_projected() => Series::RunningAvg,
            "auto" => Series::FTrue,
            "f_true" => Series::FTrue,
            "f_running_avg" => Series::RunningAvg,
            other => return Err(Error::invalid(format!("unknown series '{other}'"))),
        })
    }

    pub fn opt_seed(&self) -> u64 {
        self.opt.seed.unwrap_or(self.master_seed ^ 0x6f70_7400)
    }
}

impl BoundSpec {
    pub fn theorem(&self, default_gamma: f64) -> Result<Theorem> {
        let delta = || {
            self.delta
                .ok_or_else(|| Error::invalid(format!("theorem{} needs delta", self.theorem)))
        };
        let confidence = || match (self.delta, self.probability) {
            (Some(d), None) => Ok(Confidence::Delta(d)),
            (None, Some(p)) => Ok(Confidence::Probability(p)),
            _ => Err(Error::invalid(format!(
                "theorem{} needs exactly one of delta or probability",
                self.theorem
            ))),
        };
        Ok(match self.theorem {
            1 => Theorem::Pga { delta: delta()? },
            2 => Theorem::BoostedPga {
                delta: delta()?,
                gamma: self.gamma.unwrap_or(default_gamma),
                smoothness: match self.smoothness.as_deref().unwrap_or("derived") {
                    "derived" => BoostedSmoothness::Derived,
                    "stated" => BoostedSmoothness::Stated,
                    other => return Err(Error::invalid(format!("unknown smoothness '{other}'"))),
                },
            },
            3 => Theorem::ScgVariance {
                confidence: confidence()?,
            },
            4 => Theorem::ScgSubGaussian {
                delta: delta()?,
                alpha: self
                    .alpha
                    .ok_or_else(|| Error::invalid("theorem4 needs alpha"))?,
            },
            5 => Theorem::Scgpp {
                confidence: confidence()?,
                exponent: match self.exponent.as_deref().unwrap_or("linear") {
                    "linear" => ScgppExponent::Linear,
                    "quadratic" => ScgppExponent::Quadratic,
                    other => return Err(Error::invalid(format!("unknown exponent '{other}'"))),
                },
            },
            other => return Err(Error::invalid(format!("unknown theorem id {other}"))),
        })
    }
}

fn required<T: Copy>(v: Option<T>, kind: &str, name: &str) -> Result<T> {
    v.ok_or_else(|| Error::invalid(format!("problem kind {kind} needs problem.{name}")))
}

fn mapping(spec: &ProblemSpec) -> Result<FrequencyMapping> {
    match spec.mapping.as_deref().unwrap_or("exponential") {
        "exponential" => Ok(FrequencyMapping::Exponential),
        "linear" => Ok(FrequencyMapping::Linear {
            cap: spec.linear_cap.unwrap_or(FrequencyMapping::DEFAULT_LINEAR_CAP),
        }),
        other => Err(Error::invalid(format!("unknown frequency mapping '{other}'"))),
    }
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Problem> {
        let budget_options = || BudgetOptions {
            advertisers: self.advertisers.unwrap_or(1),
            alphas: None,
            upper: self.upper,
        };
        match self.kind {
            ProblemKind::NqpGenerate => {
                let k = "nqp-generate";
                let mut generator = NqpGenerator::new(
                    required(self.n, k, "n")?,
                    required(self.m, k, "m")?,
                    self.low.unwrap_or(-1.0),
                    self.high.unwrap_or(0.0),
                );
                if let Some(c) = self.constraint_value {
                    generator = generator.with_fill(ConstraintFill::Constant(c));
                }
                Ok(Problem::Nqp(generator.generate(self.seed.unwrap_or(0))?))
            }
            ProblemKind::NqpFile => {
                let path = self.path_or_err("nqp-file")?;
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                Ok(Problem::Nqp(NqpObjective::from_toml_str(&text)?))
            }
            ProblemKind::BudgetFile => {
                let path = self.path_or_err("budget-file")?;
                Ok(Problem::Budget(load_bipartite(path, mapping(self)?, &budget_options())?))
            }
            ProblemKind::BudgetSynthetic => {
                let k = "budget-synthetic";
                let spec = SyntheticBipartite {
                    channels: required(self.channels, k, "channels")?,
                    customers: required(self.customers, k, "customers")?,
                    density: self.density.unwrap_or(0.3),
                    max_frequency: self.max_frequency.unwrap_or(10),
                };
                let edges = synthetic_bipartite(self.seed.unwrap_or(0), &spec)?;
                Ok(Problem::Budget(BudgetAllocationObjective::from_frequencies(
                    spec.channels,
                    spec.customers,
                    &edges,
                    mapping(self)?,
                    &budget_options(),
                )?))
            }
        }
    }

    fn path_or_err(&self, kind: &str) -> Result<&Path> {
        self.path
            .as_deref()
            .ok_or_else(|| Error::invalid(format!("problem kind {kind} needs problem.path")))
    }
}
