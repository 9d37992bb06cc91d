//! Versioned experiment configuration. Unknown fields are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adversary::InstanceSpec;
use crate::distributions::RateFn;
use crate::error::{Error, Result};
use crate::identify::{IdAlgorithm, WindowFn};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// How rate points are computed; `auto` prefers exact when it fits the budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MethodChoice {
    Auto,
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    Erm {
        #[serde(default)]
        window: WindowFn,
    },
    Margin {
        #[serde(default)]
        window: WindowFn,
    },
    Constant {
        index: usize,
    },
    WitnessElimination {},
}

impl AlgorithmSpec {
    pub fn identification(&self) -> Result<IdAlgorithm> {
        let alg = match *self {
            AlgorithmSpec::Erm { window } => IdAlgorithm::Erm { window },
            AlgorithmSpec::Margin { window } => IdAlgorithm::Margin { window },
            AlgorithmSpec::Constant { index } => IdAlgorithm::Constant { index },
            AlgorithmSpec::WitnessElimination {} => {
                return Err(Error::Config("witness-elimination is a generator, not an identifier".into()))
            }
        };
        alg.validate()?;
        Ok(alg)
    }

    pub fn generation(&self) -> Result<()> {
        match self {
            AlgorithmSpec::WitnessElimination {} => Ok(()),
            other => Err(Error::Config(format!("{other:?} is not a generation algorithm"))),
        }
    }
}

impl From<IdAlgorithm> for AlgorithmSpec {
    fn from(a: IdAlgorithm) -> Self {
        match a {
            IdAlgorithm::Erm { window } => AlgorithmSpec::Erm { window },
            IdAlgorithm::Margin { window } => AlgorithmSpec::Margin { window },
            IdAlgorithm::Constant { index } => AlgorithmSpec::Constant { index },
        }
    }
}

/// Every field is optional in the file; command-line flags override it and
/// per-command defaults fill the rest. The resolved form is echoed into the
/// outputs and manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<AlgorithmSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateFn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
}

impl ExperimentConfig {
    pub fn new() -> Self {
        ExperimentConfig { schema: SCHEMA_VERSION, ..Default::default() }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema {} (expected {SCHEMA_VERSION})",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(grid) = &self.n_grid {
            if grid.is_empty() || grid.contains(&0) {
                return Err(Error::Config("n_grid must be a nonempty list of positive integers".into()));
            }
        }
        if self.trials == Some(0) {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        Ok(())
    }
}

/// `[2^lo, ..., 2^hi]`.
pub fn geometric_grid(lo: u32, hi: u32) -> Vec<u64> {
    (lo..=hi).map(|k| 1u64 << k).collect()
}
