//! High-probability lower bounds for the four algorithms, and the constants
//! they consume.
//!
//! Every bound is returned as-is, including negative (vacuous) values. OPT is
//! always supplied by the caller.

mod gamma;
mod spectral;

use std::f64::consts::E;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub use gamma::gamma_fn;
pub use spectral::spectral_norm;

/// `1 - 1/e`.
pub const ONE_MINUS_INV_E: f64 = 1.0 - 1.0 / E;

/// Problem and noise constants shared by all bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundConstants {
    /// Lipschitz constant of the gradient.
    pub lipschitz: f64,
    /// Diameter bound of the feasible region.
    pub diameter: f64,
    /// Almost-sure bound on the gradient noise norm (may be infinite).
    pub noise_bound: f64,
    /// Noise scale: standard deviation of the noise norm.
    pub sigma: f64,
    pub opt: f64,
    /// `‖∇F(x₀) − ḡ₀‖`, which enters the SCG variance constant.
    pub grad0_norm: f64,
}

impl BoundConstants {
    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64| v >= 0.0 && v.is_finite();
        if !finite_nonneg(self.lipschitz) || !finite_nonneg(self.diameter) {
            return Err(Error::invalid("L and D must be finite and non-negative"));
        }
        if self.noise_bound.is_nan() || self.noise_bound < 0.0 || !finite_nonneg(self.sigma) {
            return Err(Error::invalid("M and sigma must be non-negative"));
        }
        if !(self.opt > 0.0 && self.opt.is_finite()) {
            return Err(Error::invalid("OPT must be positive"));
        }
        Ok(())
    }
}

/// Smoothness constant used for the auxiliary objective of boosted PGA.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BoostedSmoothness {
    /// `L (γ + e^{-γ} - 1) / γ²`, which is `L/e` at γ = 1.
    #[default]
    Derived,
    /// `L (1 + 1/e)`.
    Stated,
}

/// Denominator power of the `δ L D²` term in the SCG++ bound.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ScgppExponent {
    /// `δ L D² / T`.
    #[default]
    Linear,
    /// `δ L D² / T²`.
    Quadratic,
}

/// `K = Γ(1/(1-α)) / (1-α)`, which bounds `Σ_t (1 - t^{-α})^t`.
pub fn k_constant(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let inv = 1.0 / (1.0 - alpha);
    Ok(inv * gamma_fn(inv)?)
}

/// Partial sum `Σ_{t=1}^{T} (1 - t^{-α})^t`.
pub fn momentum_series_check(alpha: f64, iterations: u64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok((1..=iterations)
        .map(|t| {
            let t = t as f64;
            (1.0 - t.powf(-alpha)).powf(t)
        })
        .sum())
}

/// `δ = √(T / (1 - p))`, the substitution giving confidence `p` in the
/// Chebyshev-style bounds.
pub fn delta_for_confidence(iterations: f64, p: f64) -> f64 {
    (iterations / (1.0 - p)).sqrt()
}

fn azuma_term(diameter: f64, scale: f64, t: f64, delta: f64) -> f64 {
    // D·M·√(ln(1/δ) / 2T), with the M = 0 case kept exactly zero
    if scale == 0.0 || diameter == 0.0 {
        0.0
    } else {
        diameter * scale * ((1.0 / delta).ln() / (2.0 * t)).sqrt()
    }
}

/// Average-iterate bound for projected gradient ascent:
/// `OPT/2 − C/√T − D M √(ln(1/δ)/2T)` with `C = (8(L+M)² + D²)/8`.
pub fn theorem1_bound(c: &BoundConstants, iterations: f64, delta: f64) -> f64 {
    let t = iterations;
    let lm = c.lipschitz + c.noise_bound;
    let big_c = (8.0 * lm * lm + c.diameter * c.diameter) / 8.0;
    0.5 * c.opt - big_c / t.sqrt() - azuma_term(c.diameter, c.noise_bound, t, delta)
}

/// Smoothness constant of the auxiliary objective for boost parameter γ.
pub fn boosted_smoothness(lipschitz: f64, gamma: f64, variant: BoostedSmoothness) -> f64 {
    match variant {
        BoostedSmoothness::Derived => lipschitz * (gamma + (-gamma).exp() - 1.0) / (gamma * gamma),
        BoostedSmoothness::Stated => lipschitz * (1.0 + 1.0 / E),
    }
}

/// Noise bound of the boosted estimator: `(M + 2LD)(1 − e^{−γ})/γ`.
pub fn boosted_noise_bound(c: &BoundConstants, gamma: f64) -> f64 {
    (c.noise_bound + 2.0 * c.lipschitz * c.diameter) * (1.0 - (-gamma).exp()) / gamma
}

/// Average-iterate bound for boosted PGA with weak-submodularity γ:
/// `(1 − e^{−γ})OPT − C′/√T − D M′ √(ln(1/δ)/2T)`,
/// `C′ = (8(L′D + M′)² + D²)/8`.
pub fn theorem2_bound(
    c: &BoundConstants,
    iterations: f64,
    delta: f64,
    gamma: f64,
    variant: BoostedSmoothness,
) -> f64 {
    let t = iterations;
    let l_aux = boosted_smoothness(c.lipschitz, gamma, variant);
    let m_aux = boosted_noise_bound(c, gamma);
    let inner = l_aux * c.diameter + m_aux;
    let big_c = (8.0 * inner * inner + c.diameter * c.diameter) / 8.0;
    (1.0 - (-gamma).exp()) * c.opt - big_c / t.sqrt() - azuma_term(c.diameter, m_aux, t, delta)
}

/// `Q = max(‖∇F(x₀) − ḡ₀‖² 9^{2/3}, 16σ² + 3L²D²)`.
pub fn scg_variance_constant(c: &BoundConstants) -> f64 {
    let first = c.grad0_norm * c.grad0_norm * 9f64.powf(2.0 / 3.0);
    let second = 16.0 * c.sigma * c.sigma + 3.0 * (c.lipschitz * c.diameter).powi(2);
    first.max(second)
}

fn chebyshev_probability(iterations: f64, delta: f64) -> f64 {
    (1.0 - iterations / (delta * delta)).max(0.0)
}

/// Final-iterate SCG bound under bounded variance. Returns `(bound, prob)`
/// with `prob = max(0, 1 − T/δ²)`.
pub fn theorem3_bound(c: &BoundConstants, iterations: f64, delta: f64) -> (f64, f64) {
    let t = iterations;
    let q = scg_variance_constant(c);
    let bound = ONE_MINUS_INV_E * c.opt
        - delta * 2.0 * q.sqrt() * c.diameter / t.cbrt()
        - c.lipschitz * c.diameter * c.diameter / (2.0 * t * t);
    (bound, chebyshev_probability(t, delta))
}

/// Final-iterate SCG bound under sub-Gaussian noise with momentum `1/t^α`:
/// `(1−1/e)OPT − 2DKσ√(ln(1/δ))/√T − ((4K+1)/2) L D²/T`.
pub fn theorem4_bound(c: &BoundConstants, iterations: f64, delta: f64, alpha: f64) -> Result<f64> {
    let t = iterations;
    let k = k_constant(alpha)?;
    let noise = if c.sigma == 0.0 {
        0.0
    } else {
        2.0 * c.diameter * k * c.sigma * (1.0 / delta).ln().sqrt() / t.sqrt()
    };
    Ok(ONE_MINUS_INV_E * c.opt
        - noise
        - (4.0 * k + 1.0) / 2.0 * c.lipschitz * c.diameter * c.diameter / t)
}

/// Final-iterate SCG++ bound. Returns `(bound, prob)` with
/// `prob = max(0, 1 − T/δ²)`.
pub fn theorem5_bound(
    c: &BoundConstants,
    iterations: f64,
    delta: f64,
    exponent: ScgppExponent,
) -> (f64, f64) {
    let t = iterations;
    let ld2 = c.lipschitz * c.diameter * c.diameter;
    let denom = match exponent {
        ScgppExponent::Linear => t,
        ScgppExponent::Quadratic => t * t,
    };
    let bound = ONE_MINUS_INV_E * c.opt - delta * ld2 / denom - ld2 / (2.0 * t * t);
    (bound, chebyshev_probability(t, delta))
}

/// Confidence for the Chebyshev-style bounds: a fixed δ, or a target
/// probability `p` with `δ = √(T/(1−p))` at each `T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Confidence {
    Delta(f64),
    Probability(f64),
}

impl Confidence {
    fn delta_at(&self, iterations: f64) -> f64 {
        match *self {
            Confidence::Delta(d) => d,
            Confidence::Probability(p) => delta_for_confidence(iterations, p),
        }
    }
}

/// Which iterate statistic a bound certifies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Certifies {
    /// `(1/T) Σ F(x_t)`.
    AverageIterate,
    /// `F(x_T)`.
    FinalIterate,
}

/// A selected bound with its confidence and variant parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Theorem {
    Pga {
        delta: f64,
    },
    BoostedPga {
        delta: f64,
        gamma: f64,
        smoothness: BoostedSmoothness,
    },
    ScgVariance {
        confidence: Confidence,
    },
    ScgSubGaussian {
        delta: f64,
        alpha: f64,
    },
    Scgpp {
        confidence: Confidence,
        exponent: ScgppExponent,
    },
}

impl Theorem {
    /// Theorem number, 1 through 5.
    pub fn id(&self) -> u8 {
        match self {
            Theorem::Pga { .. } => 1,
            Theorem::BoostedPga { .. } => 2,
            Theorem::ScgVariance { .. } => 3,
            Theorem::ScgSubGaussian { .. } => 4,
            Theorem::Scgpp { .. } => 5,
        }
    }

    pub fn certifies(&self) -> Certifies {
        match self {
            Theorem::Pga { .. } | Theorem::BoostedPga { .. } => Certifies::AverageIterate,
            _ => Certifies::FinalIterate,
        }
    }

    /// Whether the bound needs the almost-sure noise bound `M`.
    pub fn needs_noise_bound(&self) -> bool {
        matches!(self, Theorem::Pga { .. } | Theorem::BoostedPga { .. })
    }

    /// Whether the bound needs the noise scale σ.
    pub fn needs_sigma(&self) -> bool {
        matches!(
            self,
            Theorem::ScgVariance { .. } | Theorem::ScgSubGaussian { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        let unit_delta = |d: f64| {
            if d > 0.0 && d < 1.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("delta must lie in (0, 1), got {d}")))
            }
        };
        let confidence = |c: &Confidence| match *c {
            Confidence::Delta(d) if d > 0.0 && d.is_finite() => Ok(()),
            Confidence::Probability(p) if p > 0.0 && p < 1.0 => Ok(()),
            other => Err(Error::invalid(format!("invalid confidence {other:?}"))),
        };
        match self {
            Theorem::Pga { delta } => unit_delta(*delta),
            Theorem::BoostedPga { delta, gamma, .. } => {
                unit_delta(*delta)?;
                if *gamma > 0.0 && *gamma <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("gamma must lie in (0, 1], got {gamma}")))
                }
            }
            Theorem::ScgVariance { confidence: c } => confidence(c),
            Theorem::ScgSubGaussian { delta, alpha } => {
                unit_delta(*delta)?;
                k_constant(*alpha).map(|_| ())
            }
            Theorem::Scgpp { confidence: c, .. } => confidence(c),
        }
    }

    /// Evaluates the bound at iteration count `t`.
    pub fn evaluate(&self, c: &BoundConstants, t: u64) -> Result<BoundPoint> {
        let tf = t as f64;
        let (value, prob) = match *self {
            Theorem::Pga { delta } => (theorem1_bound(c, tf, delta), None),
            Theorem::BoostedPga {
                delta,
                gamma,
                smoothness,
            } => (theorem2_bound(c, tf, delta, gamma, smoothness), None),
            Theorem::ScgVariance { confidence } => {
                let (b, p) = theorem3_bound(c, tf, confidence.delta_at(tf));
                (b, Some(p))
            }
            Theorem::ScgSubGaussian { delta, alpha } => {
                (theorem4_bound(c, tf, delta, alpha)?, None)
            }
            Theorem::Scgpp {
                confidence,
                exponent,
            } => {
                let (b, p) = theorem5_bound(c, tf, confidence.delta_at(tf), exponent);
                (b, Some(p))
            }
        };
        Ok(BoundPoint { t, value, prob })
    }

    /// Evaluates the bound for `t = 1..=iterations`.
    pub fn curve(&self, c: &BoundConstants, iterations: u64) -> Result<BoundCurve> {
        self.validate()?;
        let points = (1..=iterations)
            .map(|t| self.evaluate(c, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(BoundCurve {
            theorem: self.id(),
            certifies: self.certifies(),
            points,
        })
    }

    /// Human-readable parameter summary for CSV header comments.
    pub fn describe(&self) -> String {
        match *self {
            Theorem::Pga { delta } => format!("theorem1 delta={delta}"),
            Theorem::BoostedPga {
                delta,
                gamma,
                smoothness,
            } => format!("theorem2 delta={delta} gamma={gamma} smoothness={smoothness:?}"),
            Theorem::ScgVariance { confidence } => format!("theorem3 {}", describe_conf(confidence)),
            Theorem::ScgSubGaussian { delta, alpha } => {
                let k = k_constant(alpha).unwrap_or(f64::NAN);
                format!("theorem4 delta={delta} alpha={alpha} K={k}")
            }
            Theorem::Scgpp {
                confidence,
                exponent,
            } => format!("theorem5 {} exponent={exponent:?}", describe_conf(confidence)),
        }
    }
}

fn describe_conf(c: Confidence) -> String {
    match c {
        Confidence::Delta(d) => format!("delta={d}"),
        Confidence::Probability(p) => format!("p={p}"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundPoint {
    pub t: u64,
    pub value: f64,
    /// Success probability for the Chebyshev-style bounds; `None` where the
    /// confidence is the input δ.
    pub prob: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundCurve {
    pub theorem: u8,
    pub certifies: Certifies,
    pub points: Vec<BoundPoint>,
}

impl BoundCurve {
    pub fn last(&self) -> Option<&BoundPoint> {
        self.points.last()
    }

    /// Writes `t,bound_value,prob` rows after `#`-prefixed comment lines.
    /// The first comment records the theorem id so the file can be read back.
    pub fn write_csv(&self, path: &Path, comments: &[String]) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let certifies = match self.certifies {
            Certifies::AverageIterate => "average_iterate",
            Certifies::FinalIterate => "final_iterate",
        };
        writeln!(out, "# theorem={} certifies={certifies}", self.theorem)
            .map_err(|e| Error::io(path, e))?;
        for c in comments {
            writeln!(out, "# {c}").map_err(|e| Error::io(path, e))?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "bound_value", "prob"])?;
        for p in &self.points {
            let prob = p.prob.map(crate::format_f64).unwrap_or_default();
            w.write_record([p.t.to_string(), crate::format_f64(p.value), prob])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let schema = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg,
        };
        let first = text.lines().next().unwrap_or_default();
        let mut theorem = None;
        let mut certifies = None;
        for token in first.trim_start_matches('#').split_whitespace() {
            if let Some(v) = token.strip_prefix("theorem=") {
                theorem = v.parse::<u8>().ok();
            } else if let Some(v) = token.strip_prefix("certifies=") {
                certifies = match v {
                    "average_iterate" => Some(Certifies::AverageIterate),
                    "final_iterate" => Some(Certifies::FinalIterate),
                    _ => None,
                };
            }
        }
        let (Some(theorem), Some(certifies)) = (theorem, certifies) else {
            return Err(schema("missing '# theorem=<id> certifies=<kind>' header".into()));
        };
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "bound_value", "prob"] {
            return Err(schema(format!("unexpected columns {headers:?}")));
        }
        let mut points = Vec::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
            let bad = |msg: &str| Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: msg.to_owned(),
            };
            let t = record[0].parse().map_err(|_| bad("bad t"))?;
            let value = record[1].parse().map_err(|_| bad("bad bound_value"))?;
            let prob = if record[2].is_empty() {
                None
            } else {
                Some(record[2].parse().map_err(|_| bad("bad prob"))?)
            };
            points.push(BoundPoint { t, value, prob });
        }
        Ok(Self {
            theorem,
            certifies,
            points,
        })
    }
}
