//! Bi-objective score of a design against a set of target points.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chain_kinematics::{solve_ik, GravityModel, IkConfig};
use crate::design_space::DesignParams;
use crate::error::{Error, Result};

/// Target operation points, meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSet {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub points: Vec<[f64; 3]>,
}

impl TargetSet {
    pub fn new(name: impl Into<String>, points: Vec<[f64; 3]>) -> Result<Self> {
        let t = Self {
            name: name.into(),
            note: None,
            points,
        };
        t.check()?;
        Ok(t)
    }

    pub fn check(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Config(format!("target set '{}' has no points", self.name)));
        }
        if let Some(i) = self
            .points
            .iter()
            .position(|p| !p.iter().all(|v| v.is_finite()))
        {
            return Err(Error::Config(format!(
                "target set '{}': point {i} is not finite",
                self.name
            )));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let t: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        t.check()?;
        Ok(t)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `(E^pos, E^torque)`, both minimized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValues {
    pub e_pos: f64,
    pub e_torque: f64,
}

impl ObjectiveValues {
    pub const fn new(e_pos: f64, e_torque: f64) -> Self {
        Self { e_pos, e_torque }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.e_pos, self.e_torque]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetDiagnostics {
    pub target: [f64; 3],
    pub reached: [f64; 3],
    pub torque: Vec<f64>,
    pub e_pos: f64,
    pub e_torque: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub objectives: ObjectiveValues,
    pub per_target: Vec<TargetDiagnostics>,
    pub params: DesignParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    #[serde(default)]
    pub gravity: GravityModel,
    #[serde(default)]
    pub ik: IkConfig,
    /// Torque scale factor.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    40.0
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            gravity: GravityModel::default(),
            ik: IkConfig::default(),
            alpha: default_alpha(),
        }
    }
}

impl EvalConfig {
    pub fn check(&self) -> Result<()> {
        self.gravity.check()?;
        self.ik.check()?;
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::Config("alpha must be positive and finite".into()));
        }
        Ok(())
    }
}

/// Solves IK from the zero posture for every target independently and sums
/// `E^pos = Σ ‖P^ik_i − P^ref_i‖` and `E^torque = α Σ ‖τ^ik_i‖`.
pub fn evaluate(params: &DesignParams, targets: &TargetSet, cfg: &EvalConfig) -> Result<EvaluationReport> {
    let mut per_target = Vec::with_capacity(targets.len());
    for &target in &targets.points {
        let sol = solve_ik(params, target, &cfg.gravity, &cfg.ik)?;
        let torque_norm = sol.torque.iter().map(|t| t * t).sum::<f64>().sqrt();
        per_target.push(TargetDiagnostics {
            target,
            reached: sol.reached,
            e_pos: sol.residual,
            e_torque: cfg.alpha * torque_norm,
            torque: sol.torque,
        });
    }
    let e_pos = per_target.iter().map(|t| t.e_pos).sum();
    let e_torque = per_target.iter().map(|t| t.e_torque).sum();
    Ok(EvaluationReport {
        objectives: ObjectiveValues { e_pos, e_torque },
        per_target,
        params: params.clone(),
    })
}
