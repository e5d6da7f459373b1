//! Flat JSON experiment configuration. Every key mirrors a command-line flag.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stirsim::dynamics::geometric_grid;
use stirsim::lattice::Torus;
use stirsim::rng::DEFAULT_SEED;
use stirsim::state::ModelParams;

/// Environment variable that overrides the output directory of a config file.
pub const OUTPUT_ENV: &str = "STIRSIM_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub d: usize,
    #[serde(rename = "L")]
    pub side: usize,
    pub k: usize,
    /// Number of tracked species; optional, must equal the length of `p`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    pub p: Vec<f64>,
    /// Time scale of the rescaled process.
    #[serde(rename = "N")]
    pub n: f64,
    /// Path horizon in rescaled time.
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Checkpoints in rescaled time; a geometric grid when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    pub octaves: usize,
    pub replicas: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub record_events: bool,
    pub record_snapshots: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d: 1,
            side: 64,
            k: 1,
            l: None,
            p: vec![0.5],
            n: 100.0,
            horizon: 1.0,
            grid: None,
            octaves: 6,
            replicas: 100,
            seed: DEFAULT_SEED,
            output_dir: PathBuf::from("stirsim-out"),
            record_events: false,
            record_snapshots: false,
        }
    }
}

/// A configuration problem tied to one field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: &'static str,
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid config field `{}`: {}", self.field, self.message)
    }
}

fn field(field: &'static str, message: impl Into<String>) -> FieldError {
    FieldError {
        field,
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, FieldError> {
        serde_json::from_str(text).map_err(|e| field("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, FieldError> {
        let text = std::fs::read_to_string(path).map_err(|e| field("config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn torus(&self) -> Result<Torus, FieldError> {
        if self.d == 0 {
            return Err(field("d", "dimension must be at least 1"));
        }
        Torus::new(self.d, self.side).map_err(|e| field("L", e.to_string()))
    }

    pub fn params(&self) -> Result<ModelParams, FieldError> {
        if self.k == 0 {
            return Err(field("k", "slots per site must be at least 1"));
        }
        if let Some(l) = self.l {
            if l != self.p.len() {
                return Err(field("l", format!("l = {l} but p lists {} densities", self.p.len())));
            }
        }
        ModelParams::new(self.k, self.p.clone()).map_err(|e| field("p", e.to_string()))
    }

    /// Checkpoints in rescaled time.
    pub fn scaled_grid(&self) -> Result<Vec<f64>, FieldError> {
        let grid = match &self.grid {
            Some(g) => g.clone(),
            None => geometric_grid(self.horizon, self.octaves),
        };
        if grid.is_empty() {
            return Err(field("grid", "at least one checkpoint is required"));
        }
        if grid.iter().any(|&t| !(t > 0.0 && t <= self.horizon)) {
            return Err(field("grid", format!("checkpoints must lie in (0, T = {}]", self.horizon)));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(field("grid", "checkpoints must be strictly increasing"));
        }
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        self.torus()?;
        self.params()?;
        if self.replicas == 0 {
            return Err(field("replicas", "at least one replica is required"));
        }
        if !(self.n >= 1.0 && self.n.is_finite()) {
            return Err(field("N", format!("time scale must be at least 1, got {}", self.n)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(field("T", format!("horizon must be positive, got {}", self.horizon)));
        }
        self.scaled_grid()?;
        Ok(())
    }
}
