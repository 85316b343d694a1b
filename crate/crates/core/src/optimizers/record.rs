use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;

use super::{Algorithm, ReturnConvention, RunConfig};
use crate::error::{Error, Result};
use crate::format_f64;
use crate::objectives::Objective;
use crate::oracle::OracleStream;

#[derive(Clone, Debug, PartialEq)]
pub struct Iterate {
    pub t: u64,
    pub x: Option<DVector<f64>>,
    pub f_true: f64,
    pub f_running_avg: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub config: RunConfig,
    pub iterates: Vec<Iterate>,
    /// Iteration whose value is returned.
    pub returned_t: u64,
    pub returned_value: f64,
}

impl RunRecord {
    pub fn run_id(&self) -> u64 {
        self.config.run_id
    }

    pub fn algorithm(&self) -> Algorithm {
        self.config.algorithm
    }

    pub fn convention(&self) -> ReturnConvention {
        self.config.returned
    }

    pub fn last(&self) -> &Iterate {
        self.iterates.last().expect("a run has at least one iterate")
    }
}

/// Accumulates iterates while an algorithm runs.
pub(super) struct Recorder {
    keep: bool,
    sum: f64,
    iterates: Vec<Iterate>,
}

impl Recorder {
    pub(super) fn new(cfg: &RunConfig) -> Self {
        Self {
            keep: cfg.keep_iterates,
            sum: 0.0,
            iterates: Vec::with_capacity(cfg.iterations as usize),
        }
    }

    pub(super) fn push<O: Objective + ?Sized>(&mut self, objective: &O, x: &DVector<f64>) -> Result<()> {
        let f_true = objective.value(x)?;
        self.sum += f_true;
        let t = self.iterates.len() as u64 + 1;
        self.iterates.push(Iterate {
            t,
            x: self.keep.then(|| x.clone()),
            f_true,
            f_running_avg: self.sum / t as f64,
        });
        Ok(())
    }

    /// Select the returned iterate per the configured convention. The random
    /// convention draws one index from the run's stream.
    pub(super) fn finish<O: Objective + ?Sized>(
        self,
        oracle: &mut OracleStream<'_, O>,
        cfg: &RunConfig,
    ) -> RunRecord {
        let pick = match cfg.returned {
            ReturnConvention::LastIterate => self.iterates.len() - 1,
            ReturnConvention::UniformRandomIterate => oracle.index(self.iterates.len()),
            ReturnConvention::BestIterate => {
                let mut best = 0;
                for (i, it) in self.iterates.iter().enumerate() {
                    if it.f_true > self.iterates[best].f_true {
                        best = i;
                    }
                }
                best
            }
        };
        RunRecord {
            config: cfg.clone(),
            returned_t: self.iterates[pick].t,
            returned_value: self.iterates[pick].f_true,
            iterates: self.iterates,
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// One row per (run, iteration): `run_id,algorithm,t,f_true,f_running_avg`,
/// sorted by `(run_id, t)`.
pub fn write_battery_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.run_id());
    let mut out = create(path)?;
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "run_id,algorithm,t,f_true,f_running_avg")?;
        for r in &sorted {
            for it in &r.iterates {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    r.run_id(),
                    r.algorithm(),
                    it.t,
                    format_f64(it.f_true),
                    format_f64(it.f_running_avg)
                )?;
            }
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Returned values: `run_id,algorithm,convention,returned_t,returned_value`.
pub fn write_returns_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.run_id());
    let mut out = create(path)?;
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "run_id,algorithm,convention,returned_t,returned_value")?;
        for r in &sorted {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.run_id(),
                r.algorithm(),
                r.convention().as_str(),
                r.returned_t,
                format_f64(r.returned_value)
            )?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}
