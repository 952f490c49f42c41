//! Experiment configuration: one JSON document drives every subcommand.
//!
//! The schema is documented field by field in `docs/config.md`. Unknown
//! fields are rejected, parse failures name the offending field, and a
//! parsed config serializes back to an equivalent document.

use std::path::Path;

use serde::{Deserialize, Serialize};

use brwre::env::DisorderSpec;
use brwre::lattice::Direction;

use crate::error::{CliError, CliResult};

fn default_env_replicas() -> u64 {
    100
}

fn default_pop_replicas() -> u64 {
    100
}

fn default_cap() -> u64 {
    brwre::brw::DEFAULT_CAP
}

fn default_trajectories() -> u64 {
    16
}

fn default_sw_replicas() -> u64 {
    10_000
}

fn default_t_min() -> u32 {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Offspring disorder: family, atom laws, support cutoff, master seed.
    pub disorder: DisorderSpec,
    pub dimension: usize,
    /// Ray direction as comma-separated rationals, e.g. `"1/2,0"`.
    #[serde(default)]
    pub direction: Option<String>,
    /// Single horizon used by most subcommands.
    #[serde(default)]
    pub horizon: Option<u32>,
    /// Horizon ladder for `concentration`.
    #[serde(default)]
    pub horizons: Option<Vec<u32>>,
    #[serde(default = "default_env_replicas")]
    pub env_replicas: u64,
    #[serde(default = "default_pop_replicas")]
    pub pop_replicas: u64,
    /// Hard population bound; crossing it ends a run as survived-capped.
    #[serde(default = "default_cap")]
    pub cap: u64,
    /// Deviation thresholds for `concentration`.
    #[serde(default)]
    pub epsilons: Vec<f64>,
    /// l1 window radius for `extinction-field`.
    #[serde(default)]
    pub window_radius: Option<u32>,
    /// Block length of the embedded single-site chain.
    #[serde(default)]
    pub block_len: Option<u32>,
    /// Number of blocks of the embedded single-site chain.
    #[serde(default)]
    pub blocks: Option<u32>,
    /// First time included in growth-slope fits.
    #[serde(default = "default_t_min")]
    pub t_min: u32,
    /// Trajectory count for `simulate`.
    #[serde(default = "default_trajectories")]
    pub trajectories: u64,
    /// Replica count for the single-site chain bound in `bounds`.
    #[serde(default = "default_sw_replicas")]
    pub sw_replicas: u64,
    /// Record `|B_t| / Z_t` during `simulate` (costs one polymer recursion).
    #[serde(default)]
    pub track_ratio: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("invalid experiment config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    /// Field-level checks shared by every subcommand; subcommand-specific
    /// requirements live next to the command implementations.
    pub fn validate(&self) -> CliResult<()> {
        if self.dimension == 0 {
            return Err(CliError::config("dimension", "must be at least 1"));
        }
        self.disorder
            .atoms()
            .map_err(|e| CliError::config("disorder", e))?;
        if let Some(dir) = &self.direction {
            let parsed =
                Direction::parse(dir).map_err(|e| CliError::config("direction", e))?;
            if parsed.dimension() != self.dimension {
                return Err(CliError::config(
                    "direction",
                    format!(
                        "has {} coordinates but dimension is {}",
                        parsed.dimension(),
                        self.dimension
                    ),
                ));
            }
        }
        if self.env_replicas == 0 {
            return Err(CliError::config("env_replicas", "must be at least 1"));
        }
        if self.pop_replicas == 0 {
            return Err(CliError::config("pop_replicas", "must be at least 1"));
        }
        if self.cap == 0 {
            return Err(CliError::config("cap", "must be at least 1"));
        }
        if let Some(hs) = &self.horizons {
            if hs.is_empty() {
                return Err(CliError::config("horizons", "must not be empty"));
            }
        }
        for (i, eps) in self.epsilons.iter().enumerate() {
            if !eps.is_finite() || *eps <= 0.0 {
                return Err(CliError::config(
                    "epsilons",
                    format!("entry {i} must be a positive finite number, got {eps}"),
                ));
            }
        }
        Ok(())
    }

    pub fn require_horizon(&self) -> CliResult<u32> {
        match self.horizon {
            Some(t) if t > 0 => Ok(t),
            Some(_) => Err(CliError::config("horizon", "must be at least 1")),
            None => Err(CliError::config(
                "horizon",
                "required by this subcommand",
            )),
        }
    }

    pub fn require_direction(&self) -> CliResult<Direction> {
        let text = self.direction.as_ref().ok_or_else(|| {
            CliError::config("direction", "required by this subcommand")
        })?;
        Direction::parse(text).map_err(|e| CliError::config("direction", e))
    }

    pub fn require_horizons(&self) -> CliResult<Vec<u32>> {
        let hs = self.horizons.clone().ok_or_else(|| {
            CliError::config("horizons", "required by this subcommand")
        })?;
        if hs.contains(&0) {
            return Err(CliError::config("horizons", "entries must be at least 1"));
        }
        Ok(hs)
    }

    /// Canonical serialization used for hashing and artifacts.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
