use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: Geometry,
    #[serde(default)]
    pub params: Params,
    pub task: Task,
    #[serde(default)]
    pub sources: Sources,
    #[serde(default)]
    pub eig: EigConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub output: Output,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Geometry {
    Disk {
        n_boundary: usize,
        #[serde(default)]
        refine: usize,
    },
    Square {
        n_per_side: usize,
        #[serde(default)]
        refine: usize,
    },
    File {
        path: PathBuf,
        #[serde(default)]
        refine: usize,
    },
}

impl Geometry {
    pub fn refine(&self) -> usize {
        match self {
            Geometry::Disk { refine, .. } | Geometry::Square { refine, .. } | Geometry::File { refine, .. } => *refine,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(rename = "K", default = "one")]
    pub k: f64,
    #[serde(rename = "L", default = "one")]
    pub l: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta: f64,
    #[serde(default = "one")]
    pub gamma: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for Params {
    fn default() -> Self {
        Params {
            k: 1.0,
            l: 1.0,
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Solve2,
    Solve4,
    Eig2,
    Eig4,
    Oracle,
    Convergence,
    Poincare,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Solve2 => "solve2",
            Task::Solve4 => "solve4",
            Task::Eig2 => "eig2",
            Task::Eig4 => "eig4",
            Task::Oracle => "oracle",
            Task::Convergence => "convergence",
            Task::Poincare => "poincare",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sources {
    #[serde(default = "zero_expr")]
    pub f: String,
    #[serde(default = "zero_expr")]
    pub g: String,
    #[serde(default = "strict_default")]
    pub strict_compat: bool,
}

fn zero_expr() -> String {
    "0".into()
}

fn strict_default() -> bool {
    true
}

impl Default for Sources {
    fn default() -> Self {
        Sources {
            f: zero_expr(),
            g: zero_expr(),
            strict_compat: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    /// Relative gap below which eigenvalues form one multiplet.
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_k() -> usize {
    6
}

fn default_tol() -> f64 {
    1e-8
}

impl Default for EigConfig {
    fn default() -> Self {
        EigConfig {
            k: default_k(),
            tol: default_tol(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "default_mmax")]
    pub m_max: usize,
    #[serde(default = "default_lmax")]
    pub lambda_max: f64,
}

fn default_mmax() -> usize {
    8
}

fn default_lmax() -> f64 {
    40.0
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            m_max: default_mmax(),
            lambda_max: default_lmax(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for Output {
    fn default() -> Self {
        Output {
            dir: default_dir(),
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = RunConfig::from_json(&text)?;
        // mesh files are resolved against the config location
        if let Geometry::File { path: p, .. } = &mut cfg.geometry {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        match &self.geometry {
            Geometry::Disk { n_boundary, .. } if *n_boundary < 8 => {
                return bad(format!("geometry.n_boundary must be at least 8, got {n_boundary}"))
            }
            Geometry::Square { n_per_side, .. } if *n_per_side < 1 => {
                return bad("geometry.n_per_side must be positive".into())
            }
            _ => {}
        }
        if self.geometry.refine() > 8 {
            return bad(format!("geometry.refine = {} is beyond desk scale", self.geometry.refine()));
        }
        if matches!(self.task, Task::Eig2 | Task::Eig4) && self.eig.k == 0 {
            return bad("eig.k must be positive".into());
        }
        if !(self.eig.tol >= 0.0 && self.eig.tol < 1.0) {
            return bad(format!("eig.tol must lie in [0, 1), got {}", self.eig.tol));
        }
        if !(self.oracle.lambda_max > 0.0) || self.oracle.m_max > 30 {
            return bad("oracle needs lambda_max > 0 and m_max <= 30".into());
        }
        if self.task == Task::Convergence && !matches!(self.geometry, Geometry::Disk { .. }) {
            return bad("the convergence task uses the manufactured disk solution and needs a disk geometry".into());
        }
        if self.output.formats.is_empty() {
            return bad("output.formats must not be empty".into());
        }
        Ok(())
    }
}
