//! Aggregation of run batteries: per-iteration order statistics, fits of
//! `c1 - c2·t^{-p}`, OPT approximation and bound-violation rates.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::bounds::{BoundCurve, Certifies};
use crate::error::{Error, Result};
use crate::format_f64;
use crate::objectives::Objective;
use crate::optimizers::{run_battery, Algorithm, RunConfig, RunRecord};
use crate::oracle::NoiseModel;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesPoint {
    pub t: u64,
    pub f_true: f64,
    pub f_running_avg: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSeries {
    pub run_id: u64,
    pub algorithm: String,
    pub points: Vec<SeriesPoint>,
}

/// Runs sharing objective, algorithm, noise and `T`, sorted by run id.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialBattery {
    runs: Vec<RunSeries>,
}

impl TrialBattery {
    pub fn new(mut runs: Vec<RunSeries>) -> Result<Self> {
        let first = runs.first().ok_or_else(|| Error::invalid("empty battery"))?;
        let grid: Vec<u64> = first.points.iter().map(|p| p.t).collect();
        if grid.is_empty() {
            return Err(Error::invalid(format!("run {} has no iterations", first.run_id)));
        }
        let algorithm = first.algorithm.clone();
        for r in &runs {
            if r.algorithm != algorithm {
                return Err(Error::invalid(format!(
                    "battery mixes algorithms '{algorithm}' and '{}'",
                    r.algorithm
                )));
            }
            if r.points.len() != grid.len() || r.points.iter().zip(&grid).any(|(p, &t)| p.t != t) {
                return Err(Error::invalid(format!("run {} has a different iteration grid", r.run_id)));
            }
        }
        runs.sort_by_key(|r| r.run_id);
        if runs.windows(2).any(|w| w[0].run_id == w[1].run_id) {
            return Err(Error::invalid("duplicate run_id in battery"));
        }
        Ok(Self { runs })
    }

    pub fn from_records(records: &[RunRecord]) -> Result<Self> {
        Self::new(
            records
                .iter()
                .map(|r| RunSeries {
                    run_id: r.run_id(),
                    algorithm: r.algorithm().to_string(),
                    points: r
                        .iterates
                        .iter()
                        .map(|it| SeriesPoint {
                            t: it.t,
                            f_true: it.f_true,
                            f_running_avg: it.f_running_avg,
                        })
                        .collect(),
                })
                .collect(),
        )
    }

    /// Reads the battery CSV written by [`crate::optimizers::write_battery_csv`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let schema = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let header = lines
            .next()
            .transpose()
            .map_err(|e| Error::io(path, e))?
            .ok_or_else(|| schema(1, "empty file".into()))?;
        if header.trim() != "run_id,algorithm,t,f_true,f_running_avg" {
            return Err(schema(1, format!("unexpected header '{}'", header.trim())));
        }
        let mut runs: BTreeMap<u64, RunSeries> = BTreeMap::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let lineno = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != 5 {
                return Err(schema(lineno, format!("expected 5 fields, found {}", fields.len())));
            }
            let bad = |what: &str| schema(lineno, format!("invalid {what}"));
            let run_id: u64 = fields[0].parse().map_err(|_| bad("run_id"))?;
            let point = SeriesPoint {
                t: fields[2].parse().map_err(|_| bad("t"))?,
                f_true: fields[3].parse().map_err(|_| bad("f_true"))?,
                f_running_avg: fields[4].parse().map_err(|_| bad("f_running_avg"))?,
            };
            runs.entry(run_id)
                .or_insert_with(|| RunSeries {
                    run_id,
                    algorithm: fields[1].to_string(),
                    points: Vec::new(),
                })
                .points
                .push(point);
        }
        Self::new(runs.into_values().collect())
    }

    pub fn runs(&self) -> &[RunSeries] {
        &self.runs
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn algorithm(&self) -> &str {
        &self.runs[0].algorithm
    }

    pub fn grid(&self) -> Vec<u64> {
        self.runs[0].points.iter().map(|p| p.t).collect()
    }

    /// Final iteration index `T`.
    pub fn iterations(&self) -> u64 {
        self.runs[0].points.last().map(|p| p.t).unwrap_or(0)
    }

    /// Every value divided by `opt`.
    pub fn normalized(&self, opt: f64) -> Result<Self> {
        if !(opt > 0.0 && opt.is_finite()) {
            return Err(Error::invalid(format!("cannot normalize by {opt}")));
        }
        let mut out = self.clone();
        for r in &mut out.runs {
            for p in &mut r.points {
                p.f_true /= opt;
                p.f_running_avg /= opt;
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Statistic {
    Min,
    Median,
    /// Nearest-rank quantile, `q ∈ (0, 1)`.
    Quantile(f64),
    Mean,
}

impl Statistic {
    pub fn label(&self) -> String {
        match *self {
            Statistic::Min => "min".into(),
            Statistic::Median => "median".into(),
            Statistic::Mean => "mean".into(),
            Statistic::Quantile(q) => format!("q{}", (q * 100.0).round() as i64),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(Statistic::Min),
            "median" => Ok(Statistic::Median),
            "mean" => Ok(Statistic::Mean),
            q if q.starts_with('q') => {
                let pct: f64 = q[1..]
                    .parse()
                    .map_err(|_| Error::invalid(format!("unknown statistic '{s}'")))?;
                let stat = Statistic::Quantile(pct / 100.0);
                stat.validate()?;
                Ok(stat)
            }
            _ => Err(Error::invalid(format!("unknown statistic '{s}'"))),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Statistic::Quantile(q) if !(q > 0.0 && q < 1.0) => {
                Err(Error::invalid(format!("quantile must lie in (0, 1), got {q}")))
            }
            _ => Ok(()),
        }
    }

    /// Statistic of `values` (any order).
    pub fn apply(&self, values: &mut [f64]) -> f64 {
        let n = values.len();
        match *self {
            Statistic::Mean => values.iter().sum::<f64>() / n as f64,
            Statistic::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
            Statistic::Median => nearest_rank(values, 0.5),
            Statistic::Quantile(q) => nearest_rank(values, q),
        }
    }
}

/// The `⌈qN⌉`-th smallest value. The product is nudged down by 1e-9 so that
/// e.g. `0.9·100` selects rank 90 despite rounding.
fn nearest_rank(values: &mut [f64], q: f64) -> f64 {
    let n = values.len();
    let rank = ((q * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    values.sort_by(f64::total_cmp);
    values[rank - 1]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Series {
    FTrue,
    RunningAvg,
}

impl Series {
    fn pick(&self, p: &SeriesPoint) -> f64 {
        match self {
            Series::FTrue => p.f_true,
            Series::RunningAvg => p.f_running_avg,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StatCurve {
    pub label: String,
    pub points: Vec<(u64, f64)>,
}

impl StatCurve {
    /// `t,stat_value,stat_label`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "t,stat_value,stat_label")?;
            for &(t, v) in &self.points {
                writeln!(out, "{t},{},{}", format_f64(v), self.label)?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

/// Per-iteration statistic across the battery's runs.
pub fn trajectory_statistic(b: &TrialBattery, stat: Statistic, series: Series) -> Result<StatCurve> {
    stat.validate()?;
    if b.is_empty() {
        return Err(Error::invalid("empty battery"));
    }
    let mut column = vec![0.0; b.len()];
    let points = b
        .grid()
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            for (slot, run) in column.iter_mut().zip(b.runs()) {
                *slot = series.pick(&run.points[i]);
            }
            (t, stat.apply(&mut column))
        })
        .collect();
    Ok(StatCurve {
        label: stat.label(),
        points,
    })
}

/// Values at the final iteration, one per run.
pub fn final_values(b: &TrialBattery, series: Series) -> Vec<f64> {
    b.runs()
        .iter()
        .map(|r| series.pick(r.points.last().expect("validated non-empty")))
        .collect()
}

/// Unbiased sample variance.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FittedCurve {
    pub c1: f64,
    pub c2: f64,
    pub p: f64,
    pub label: String,
    /// Sum of squared residuals.
    pub residual: f64,
    pub n_points: usize,
}

fn fit_points(points: &[(u64, f64)], p: f64, t_min: u64) -> Vec<(f64, f64)> {
    points
        .iter()
        .filter(|(t, _)| *t >= t_min)
        .map(|&(t, y)| ((t as f64).powf(-p), y))
        .collect()
}

fn residual(data: &[(f64, f64)], c1: f64, c2: f64) -> f64 {
    data.iter().map(|&(u, y)| (y - c1 + c2 * u).powi(2)).sum()
}

/// Least squares fit of `y ≈ c1 - c2·t^{-p}` over points with `t ≥ t_min`.
pub fn fit_curve(curve: &StatCurve, p: f64, t_min: u64) -> Result<FittedCurve> {
    let data = fit_points(&curve.points, p, t_min);
    if data.len() < 2 {
        return Err(Error::invalid(format!(
            "fit needs at least 2 points with t >= {t_min}, found {}",
            data.len()
        )));
    }
    let n = data.len() as f64;
    let u_mean = data.iter().map(|d| d.0).sum::<f64>() / n;
    let y_mean = data.iter().map(|d| d.1).sum::<f64>() / n;
    let (mut suu, mut suy) = (0.0, 0.0);
    for &(u, y) in &data {
        suu += (u - u_mean) * (u - u_mean);
        suy += (u - u_mean) * (y - y_mean);
    }
    if suu <= f64::EPSILON * data.iter().map(|d| d.0 * d.0).sum::<f64>() {
        return Err(Error::invalid("singular fit: all t are equal"));
    }
    let c2 = -suy / suu;
    let c1 = y_mean + c2 * u_mean;
    Ok(FittedCurve {
        c1,
        c2,
        p,
        label: curve.label.clone(),
        residual: residual(&data, c1, c2),
        n_points: data.len(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SharedFit {
    pub c1_shared: f64,
    /// Stage-1 independent fits.
    pub individual: Vec<FittedCurve>,
    /// Stage-2 fits with `c1 = c1_shared`.
    pub refit: Vec<FittedCurve>,
}

/// Fit each curve, average the `c1`s, then refit each `c2` with that
/// common `c1`: `c2 = Σ u(c1 - y) / Σ u²`.
pub fn shared_c1_refit(curves: &[StatCurve], p: f64, t_min: u64) -> Result<SharedFit> {
    if curves.is_empty() {
        return Err(Error::invalid("no curves to fit"));
    }
    let individual = curves
        .iter()
        .map(|c| fit_curve(c, p, t_min))
        .collect::<Result<Vec<_>>>()?;
    let c1 = individual.iter().map(|f| f.c1).sum::<f64>() / individual.len() as f64;
    let refit = curves
        .iter()
        .map(|c| {
            let data = fit_points(&c.points, p, t_min);
            let num: f64 = data.iter().map(|&(u, y)| u * (c1 - y)).sum();
            let den: f64 = data.iter().map(|&(u, _)| u * u).sum();
            let c2 = num / den;
            FittedCurve {
                c1,
                c2,
                p,
                label: c.label.clone(),
                residual: residual(&data, c1, c2),
                n_points: data.len(),
            }
        })
        .collect();
    Ok(SharedFit {
        c1_shared: c1,
        individual,
        refit,
    })
}

/// Best final value over `runs` SCG runs of `iterations` steps.
pub fn approx_opt<O: Objective + ?Sized>(
    objective: &O,
    noise: NoiseModel,
    runs: u64,
    iterations: u64,
    master_seed: u64,
    threads: usize,
) -> Result<f64> {
    if runs == 0 {
        return Err(Error::invalid("approx_opt needs at least one run"));
    }
    let mut cfg = RunConfig::new(Algorithm::Scg, iterations).with_run(master_seed, 0);
    cfg.keep_iterates = false;
    let records = run_battery(objective, noise, &cfg, runs, threads)?;
    Ok(records
        .iter()
        .map(|r| r.returned_value)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Fraction of runs whose certified statistic at `T` (running average for
/// average-iterate bounds, final value otherwise) lies strictly below the
/// bound at `T`.
pub fn bound_violation_rate(b: &TrialBattery, bound: &BoundCurve) -> Result<f64> {
    let grid = b.grid();
    let same = bound.points.len() == grid.len() && bound.points.iter().zip(&grid).all(|(p, &t)| p.t == t);
    if !same {
        return Err(Error::invalid(format!(
            "bound grid (T = {}) does not match battery grid (T = {})",
            bound.last().map(|p| p.t).unwrap_or(0),
            b.iterations()
        )));
    }
    let threshold = bound.last().expect("grid is non-empty").value;
    let series = match bound.certifies {
        Certifies::AverageIterate => Series::RunningAvg,
        Certifies::FinalIterate => Series::FTrue,
    };
    let below = final_values(b, series).iter().filter(|&&v| v < threshold).count();
    Ok(below as f64 / b.len() as f64)
}
