//! Run configuration: JSON file contents merged with command-line flags.

use std::path::{Path, PathBuf};

use hjvisc::{
    flat_hamiltonian, pendulum_hamiltonian, separable_from_samples, Grid1D, HamiltonianModel,
    ScalarField,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HamiltonianSpec {
    /// `pendulum` or `flat`.
    Name(String),
    /// Potential samples on the run grid, `H = p²/2 + V`.
    Samples(SampledPotential),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampledPotential {
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<HamiltonianSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_list: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_newton_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lf_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($field:ident),*) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field; } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(mut self, top: RunConfig) -> Self {
        overlay!(
            self,
            top,
            hamiltonian,
            n,
            lambda,
            lambda_list,
            alpha,
            epsilon,
            delta,
            x0_index,
            tol,
            max_newton_iters,
            sigma,
            lf_tol,
            out
        );
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn hamiltonian_spec(&self) -> HamiltonianSpec {
        self.hamiltonian
            .clone()
            .unwrap_or_else(|| HamiltonianSpec::Name("pendulum".into()))
    }

    pub fn model(&self, grid: &Grid1D) -> Result<HamiltonianModel, CliError> {
        match self.hamiltonian_spec() {
            HamiltonianSpec::Name(name) => match name.as_str() {
                "pendulum" => Ok(pendulum_hamiltonian()),
                "flat" => Ok(flat_hamiltonian()),
                other => Err(CliError::Usage(format!(
                    "unknown hamiltonian `{other}` (expected pendulum, flat or inline samples)"
                ))),
            },
            HamiltonianSpec::Samples(p) => {
                if p.samples.len() != grid.n() {
                    return Err(CliError::Usage(format!(
                        "{} potential samples given for n = {}",
                        p.samples.len(),
                        grid.n()
                    )));
                }
                let v = ScalarField::new(*grid, p.samples)?;
                Ok(separable_from_samples(v).with_name("sampled"))
            }
        }
    }

    pub fn require_positive(value: Option<f64>, name: &str) -> Result<f64, CliError> {
        match value {
            Some(v) if v.is_finite() && v > 0.0 => Ok(v),
            Some(v) => Err(CliError::Usage(format!(
                "--{name} must be positive, got {v}"
            ))),
            None => Err(CliError::Usage(format!("--{name} is required"))),
        }
    }

    pub fn check_positive(value: Option<f64>, name: &str) -> Result<(), CliError> {
        match value {
            None => Ok(()),
            v => Self::require_positive(v, name).map(|_| ()),
        }
    }
}
