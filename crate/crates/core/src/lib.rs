//! Stochastic continuous DR-submodular maximization over polytopes.
//!
//! Four first- and second-order methods (projected gradient ascent, boosted
//! PGA, stochastic continuous greedy and its Hessian-corrected variant), the
//! objectives they are exercised on, seeded noisy oracles, closed-form
//! high-probability lower bounds, and the statistics used to compare runs
//! against those bounds.

pub mod analysis;
pub mod bounds;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod objectives;
pub mod optimizers;
pub mod oracle;

pub use error::{Error, Result};

/// Decimal rendering with 17 significant digits, used by every CSV writer.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}
