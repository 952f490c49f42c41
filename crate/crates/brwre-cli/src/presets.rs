//! Fixed catalog of desk-scale experiment configurations.
//!
//! Every preset returns a fully specified [`ExperimentConfig`]; pass
//! `--seed` to rerun one under a different master seed.

use brwre::env::{DisorderFamily, DisorderSpec};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

/// The documented two-atom mixture: laws `{0: 1/2, 2: 1/2}` and
/// `{0: 1/4, 2: 3/4}` with equal weights. Its annealed law averages to
/// `{0: 3/8, 2: 5/8}`, whose extinction probability is exactly 3/5.
pub fn mixture_spec(master_seed: u64) -> DisorderSpec {
    DisorderSpec::new(
        DisorderFamily::TwoPoint {
            law_a: vec![0.5, 0.0, 0.5],
            law_b: vec![0.25, 0.0, 0.75],
            weight_a: 0.5,
        },
        master_seed,
    )
}

/// Constant supercritical binary law `{0: 1/4, 2: 3/4}` with mean 3/2.
pub fn constant_binary_spec(master_seed: u64) -> DisorderSpec {
    DisorderSpec::new(
        DisorderFamily::Deterministic {
            pmf: vec![0.25, 0.0, 0.75],
        },
        master_seed,
    )
}

fn base(disorder: DisorderSpec, dimension: usize) -> ExperimentConfig {
    ExperimentConfig {
        disorder,
        dimension,
        direction: None,
        horizon: None,
        horizons: None,
        env_replicas: 100,
        pop_replicas: 100,
        cap: brwre::brw::DEFAULT_CAP,
        epsilons: Vec::new(),
        window_radius: None,
        block_len: None,
        blocks: None,
        t_min: 10,
        trajectories: 16,
        sw_replicas: 10_000,
        track_ratio: false,
    }
}

pub const PRESET_NAMES: [&str; 6] = [
    "thm-NT-growth",
    "thm-NTloc-direction",
    "sandwich",
    "concentration-decay",
    "weak-disorder-martingale",
    "critical-explore",
];

pub fn describe(name: &str) -> Option<&'static str> {
    match name {
        "thm-NT-growth" => Some(
            "global growth: free energy of the mixture disorder at t = 64 \
             next to survivor growth slopes from simulated trajectories",
        ),
        "thm-NTloc-direction" => Some(
            "directional growth: free energy and local survival along the \
             ray theta = 1/2 in d = 1 at admissible horizons",
        ),
        "sandwich" => Some(
            "survival sandwich: annealed upper bound (exactly 2/5 for the \
             mixture), single-site chain lower bound, and the Monte Carlo \
             survival estimate side by side",
        ),
        "concentration-decay" => Some(
            "free-energy concentration: tail frequencies of (1/t) ln Z \
             around its mean across a horizon ladder, against the \
             exponential bound",
        ),
        "weak-disorder-martingale" => Some(
            "weak disorder in d = 3: low-contrast disorder whose normalized \
             population W_t should stabilize; simulate tracks W per \
             trajectory",
        ),
        "critical-explore" => Some(
            "exploratory only: disorder tuned to Q[ln m] = 0, the boundary \
             case whose survival behavior is conjectural; no acceptance \
             check depends on it",
        ),
        _ => None,
    }
}

pub fn preset(name: &str) -> CliResult<ExperimentConfig> {
    let config = match name {
        "thm-NT-growth" => ExperimentConfig {
            horizon: Some(64),
            env_replicas: 200,
            pop_replicas: 200,
            trajectories: 200,
            t_min: 10,
            ..base(mixture_spec(2024_0001), 1)
        },
        "thm-NTloc-direction" => ExperimentConfig {
            direction: Some("1/2".to_string()),
            horizon: Some(64),
            env_replicas: 200,
            pop_replicas: 200,
            ..base(mixture_spec(2024_0002), 1)
        },
        "sandwich" => ExperimentConfig {
            horizon: Some(200),
            env_replicas: 100,
            pop_replicas: 100,
            sw_replicas: 10_000,
            ..base(mixture_spec(2024_0003), 1)
        },
        "concentration-decay" => ExperimentConfig {
            horizons: Some(vec![8, 16, 32, 64]),
            epsilons: vec![0.1, 0.2],
            env_replicas: 2000,
            ..base(mixture_spec(2024_0004), 1)
        },
        "weak-disorder-martingale" => ExperimentConfig {
            horizon: Some(15),
            trajectories: 10_000,
            ..base(
                DisorderSpec::new(
                    DisorderFamily::TwoPoint {
                        law_a: vec![0.02, 0.0, 0.98],
                        law_b: vec![0.08, 0.0, 0.92],
                        weight_a: 0.5,
                    },
                    2024_0005,
                ),
                3,
            )
        },
        "critical-explore" => ExperimentConfig {
            horizon: Some(200),
            env_replicas: 200,
            pop_replicas: 100,
            ..base(
                // Q[ln m] = (ln 2 + ln 1/2) / 2 = 0: the critical boundary.
                DisorderSpec::new(
                    DisorderFamily::TwoPoint {
                        law_a: vec![0.0, 0.0, 1.0],
                        law_b: vec![0.5, 0.5, 0.0],
                        weight_a: 0.5,
                    },
                    2024_0006,
                ),
                1,
            )
        },
        other => {
            return Err(CliError::config(
                "preset",
                format!(
                    "unknown preset '{other}'; known presets: {}",
                    PRESET_NAMES.join(", ")
                ),
            ))
        }
    };
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_is_valid_and_described() {
        for name in PRESET_NAMES {
            let config = preset(name).unwrap();
            config.validate().unwrap();
            assert!(describe(name).is_some());
        }
        assert!(preset("nonexistent").is_err());
    }

    #[test]
    fn critical_preset_sits_on_the_boundary() {
        let config = preset("critical-explore").unwrap();
        let report = config.disorder.check_assumptions().unwrap();
        assert!(report.q_ln_m.abs() < 1e-12);
    }

    #[test]
    fn config_round_trips_through_json() {
        for name in PRESET_NAMES {
            let config = preset(name).unwrap();
            let text = config.canonical_json();
            let back = ExperimentConfig::from_json(&text).unwrap();
            assert_eq!(config, back);
        }
    }
}
