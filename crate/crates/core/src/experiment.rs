//! Experiment files: a TOML document describing one run configuration, the
//! seeds to run it with and where to write the artifacts.
//!
//! ```toml
//! name = "target1-bbo"
//! mode = "bbo"
//! seeds = [0, 1, 2, 3, 4]
//! out = "out/target1-bbo"
//!
//! [targets]
//! file = "../targets/target1_approx.toml"
//!
//! [backend]
//! kind = "mock-heuristic"
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chain_kinematics::{GravityModel, IkConfig};
use crate::design_space::SpaceConfig;
use crate::error::{Error, Result};
use crate::evaluation::{EvalConfig, TargetSet};
use crate::llm_sampler::BackendConfig;
use crate::motpe_sampler::TpeConfig;
use crate::orchestrator::{Mode, RunConfig};
use crate::pareto_metrics::RefPoint;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetSpec {
    File { file: PathBuf },
    Inline(TargetSet),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub name: String,
    pub mode: Mode,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    #[serde(default = "d_n_init")]
    pub n_init: usize,
    #[serde(default = "d_n_step")]
    pub n_step: usize,
    #[serde(default = "d_n_total")]
    pub n_total: usize,
    #[serde(default = "d_feedback")]
    pub n_pareto: usize,
    #[serde(default = "d_feedback")]
    pub n_random: usize,
    #[serde(default = "d_dof")]
    pub dof: usize,
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub reference: RefPoint,
    pub targets: TargetSpec,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub ik: IkConfig,
    #[serde(default)]
    pub gravity: GravityModel,
    #[serde(default)]
    pub tpe: TpeConfig,
}

fn d_n_init() -> usize {
    10
}
fn d_n_step() -> usize {
    10
}
fn d_n_total() -> usize {
    200
}
fn d_feedback() -> usize {
    5
}
fn d_dof() -> usize {
    4
}
fn d_alpha() -> f64 {
    40.0
}

/// An experiment file with targets loaded and paths made absolute.
#[derive(Clone, Debug, PartialEq)]
pub struct Experiment {
    pub file: ExperimentFile,
    pub targets: TargetSet,
}

impl ExperimentFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl Experiment {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Parses `text`, resolving relative paths against `base`.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let mut file = ExperimentFile::from_toml_str(text)?;
        file.out = resolve(base, &file.out);
        if let BackendConfig::MockScript { script } = &mut file.backend {
            *script = resolve(base, script);
        }
        let targets = match &file.targets {
            TargetSpec::File { file: p } => TargetSet::load(resolve(base, p))?,
            TargetSpec::Inline(t) => {
                t.check()?;
                t.clone()
            }
        };
        let exp = Self { file, targets };
        exp.check()?;
        Ok(exp)
    }

    pub fn check(&self) -> Result<()> {
        if self.file.seeds.is_empty() {
            return Err(Error::Config("seeds: at least one seed is required".into()));
        }
        let mut seen = self.file.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.file.seeds.len() {
            return Err(Error::Config("seeds: duplicate seed".into()));
        }
        self.run_config(self.file.seeds[0]).check()
    }

    pub fn run_config(&self, seed: u64) -> RunConfig {
        let f = &self.file;
        RunConfig {
            targets: self.targets.clone(),
            space: SpaceConfig::with_dof(f.dof),
            mode: f.mode,
            n_init: f.n_init,
            n_step: f.n_step,
            n_total: f.n_total,
            n_pareto: f.n_pareto,
            n_random: f.n_random,
            eval: EvalConfig {
                gravity: f.gravity,
                ik: f.ik,
                alpha: f.alpha,
            },
            reference: f.reference,
            tpe: f.tpe,
            backend: f.backend.clone(),
            seed,
        }
    }

    pub fn run_configs(&self) -> Vec<RunConfig> {
        self.file.seeds.iter().map(|&s| self.run_config(s)).collect()
    }
}
