//! Batch driver for the bulk-surface toolkit: reads a JSON run
//! configuration, performs one task and writes CSV/JSON artifacts.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
mod output;
mod tasks;

use std::path::PathBuf;

use thiserror::Error;

pub use config::RunConfig;
pub use output::{format_float, Cell, Table};
pub use tasks::{build_mesh, run, RunOptions, RunOutcome};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] bse_core::Error),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "invalid-config",
            CliError::Core(e) => e.kind(),
            CliError::Output { .. } => "io-error",
        }
    }

    /// 2 for invalid input, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_validation() => 2,
            _ => 3,
        }
    }

    /// One-line JSON document `{"kind": …, "message": …}`.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "kind": self.kind(), "message": self.to_string() }).to_string()
    }
}

/// Writes dispersion roots as `m,lambda,multiplicity,residual`.
pub fn write_roots(roots: &[bse_core::oracle::DispersionRoot], path: &std::path::Path) -> Result<(), CliError> {
    tasks::roots_table(roots).write(path)
}

/// Estimated orders of convergence `log(e_{i-1}/e_i) / log(h_{i-1}/h_i)`.
pub fn eoc(errors: &[f64], hs: &[f64]) -> bse_core::Result<Vec<f64>> {
    let invalid = |m: &str| Err(bse_core::Error::InvalidArgument(m.into()));
    if errors.len() != hs.len() || errors.len() < 2 {
        return invalid("eoc needs at least two errors and as many mesh sizes");
    }
    if errors.iter().any(|e| !(*e > 0.0 && e.is_finite())) || hs.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return invalid("errors and mesh sizes must be positive and finite");
    }
    if hs.windows(2).any(|w| !(w[1] < w[0])) {
        return invalid("mesh sizes must be strictly decreasing");
    }
    Ok(errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect())
}
