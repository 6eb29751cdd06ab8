//! Run configuration: a strict-schema TOML file describing the model, the
//! lattice, the SCF solver, and the optional probe batteries. Unknown keys
//! are rejected; omitted sections take documented defaults; the parsed
//! config round-trips losslessly through serialization.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::RmfError;
use crate::fields::ModelParams;
use crate::lattice::LatticeSpec;
use crate::scf::SCFConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    /// box side length in units of 1/m_b
    pub box_length: f64,
    /// even node count per axis
    pub points_per_dim: usize,
}

impl LatticeConfig {
    pub fn to_spec(&self) -> Result<LatticeSpec, RmfError> {
        LatticeSpec::new(self.box_length, self.points_per_dim)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    /// occupation-weight pairs (lambda_p, lambda_n) for the subadditivity
    /// probe; each splits the ground-state problem at the given total weight
    pub subadditivity_lambdas: Vec<[f64; 2]>,
    /// ball radii for the concentration profile, in units of 1/m_b
    pub concentration_radii: Vec<f64>,
    /// step sizes for the commutator descent probe
    pub descent_epsilons: Vec<f64>,
    /// run the operator-bound battery after the solve
    pub check_bounds: bool,
    /// random orbital sets drawn in the bound battery
    pub bounds_trials: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            subadditivity_lambdas: Vec::new(),
            concentration_radii: Vec::new(),
            descent_epsilons: vec![1e-3, 5e-4],
            check_bounds: false,
            bounds_trials: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// output directory; overridden by --out on the command line
    pub directory: String,
    /// also write field and density snapshots
    pub dump_fields: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: "out".into(), dump_fields: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub scf: SCFConfig,
    #[serde(default)]
    pub probes: ProbeConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// seed for the randomized batteries (bound checks, symmetry mixings)
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    12345
}

impl RunConfig {
    /// Validates every section; lattice and model errors carry the offending
    /// field in their message.
    pub fn validate(&self) -> Result<(), RmfError> {
        self.model.validate()?;
        self.lattice.to_spec()?;
        self.scf.validate()?;
        for pair in &self.probes.subadditivity_lambdas {
            for &l in pair {
                if !(0.0..=1.0).contains(&l) {
                    return Err(RmfError::Config(format!(
                        "probes.subadditivity_lambdas entries must lie in [0, 1], got {l}"
                    )));
                }
            }
        }
        for &r in &self.probes.concentration_radii {
            if !(r > 0.0) {
                return Err(RmfError::Config(format!(
                    "probes.concentration_radii must be positive, got {r}"
                )));
            }
        }
        for &eps in &self.probes.descent_epsilons {
            if !(eps > 0.0) {
                return Err(RmfError::Config(format!(
                    "probes.descent_epsilons must be positive, got {eps}"
                )));
            }
        }
        Ok(())
    }

    /// Serializes the config with all defaults materialized.
    pub fn echo_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }
}

/// Parses and validates a TOML run configuration. Schema violations name the
/// offending key and expected type in the error message.
pub fn parse_config(path: &Path) -> Result<RunConfig, RmfError> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, RmfError> {
    let config: RunConfig = toml::from_str(text)
        .map_err(|e| RmfError::Config(format!("config schema error: {}", e.message())))?;
    config.validate()?;
    Ok(config)
}
