//! One function per subcommand; each consumes a validated config and fills
//! the output directory, leaving the manifest to the caller.

use serde::Serialize;

use brwre::brw::{
    self, embedded_sw, growth_rate, simulate, survival_probability, EmbeddedSwOptions,
    SimStatus, SurvivalOptions, TrackOptions, Trajectory,
};
use brwre::env::EnvironmentField;
use brwre::genfun::{extinction_field, fixed_point_residual, gw_bound, sw_bound};
use brwre::lattice::Direction;
use brwre::numeric::SeedChain;
use brwre::polymer::{
    concentration_tail, directional_free_energy, free_energy_bounds, global_free_energy,
    FreeEnergyBounds, FreeEnergyEstimate,
};
use brwre::stats::{concentration_bound, BoundForm, ConcentrationParams};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{Cell, Csv, OutputWriter};

const STREAM_CLI_SIM: u64 = 0x434c_4901;
const STREAM_CLI_EMB: u64 = 0x434c_4902;

fn survival_options(config: &ExperimentConfig, horizon: u32) -> SurvivalOptions {
    SurvivalOptions {
        horizon,
        cap: config.cap,
        env_replicas: config.env_replicas,
        pop_replicas: config.pop_replicas,
    }
}

fn require_admissible(dir: &Direction, t: u32, field: &str) -> CliResult<()> {
    if dir.is_admissible(t) {
        Ok(())
    } else {
        Err(CliError::config(
            field,
            format!(
                "{t} is not an admissible horizon for direction {dir} (period {})",
                dir.period()
            ),
        ))
    }
}

#[derive(Serialize)]
struct SimulateSummary {
    trajectories: u64,
    horizon: u32,
    annealed_mean: f64,
    extinct: usize,
    alive_at_horizon: usize,
    capped: usize,
    /// Mean growth slope of `ln |B_t|` over survivors, when enough points.
    mean_survivor_slope: Option<f64>,
}

/// One independent environment and population per trajectory; records the
/// per-step series and a status summary.
pub fn cmd_simulate(config: &ExperimentConfig, writer: &mut OutputWriter) -> CliResult<()> {
    let horizon = config.require_horizon()?;
    let direction = config
        .direction
        .as_ref()
        .map(|_| config.require_direction())
        .transpose()?;
    let report = config.disorder.check_assumptions()?;
    let track = TrackOptions {
        partition: config.track_ratio,
        direction,
        annealed_mean: Some(report.q_m),
    };
    let trajectories: Vec<Trajectory> = (0..config.trajectories)
        .map(|r| {
            let env = EnvironmentField::new(&config.disorder, r)?;
            let mut rng = SeedChain::new(config.disorder.master_seed)
                .push(STREAM_CLI_SIM)
                .push(r)
                .rng();
            Ok(simulate(
                &env,
                config.dimension,
                horizon,
                config.cap,
                &track,
                &mut rng,
            ))
        })
        .collect::<CliResult<_>>()?;

    let mut csv = Csv::new(&["replica", "t", "total", "local_count", "w", "ratio"]);
    for (r, traj) in trajectories.iter().enumerate() {
        for p in &traj.points {
            csv.row(&[
                Cell::U64(r as u64),
                Cell::U32(p.t),
                Cell::U64(p.total),
                p.local.map_or(Cell::Empty, Cell::U64),
                p.w.map_or(Cell::Empty, Cell::F64),
                p.ratio.map_or(Cell::Empty, Cell::F64),
            ]);
        }
    }
    writer.write_text("trajectory.csv", &csv.finish())?;

    let slopes: Vec<f64> = trajectories
        .iter()
        .filter(|t| t.survived())
        .filter_map(|t| growth_rate(t, config.t_min).ok().map(|f| f.slope))
        .collect();
    let summary = SimulateSummary {
        trajectories: config.trajectories,
        horizon,
        annealed_mean: report.q_m,
        extinct: trajectories
            .iter()
            .filter(|t| matches!(t.status, SimStatus::Extinct { .. }))
            .count(),
        alive_at_horizon: trajectories
            .iter()
            .filter(|t| matches!(t.status, SimStatus::AliveAtHorizon))
            .count(),
        capped: trajectories
            .iter()
            .filter(|t| matches!(t.status, SimStatus::Capped { .. }))
            .count(),
        mean_survivor_slope: if slopes.is_empty() {
            None
        } else {
            Some(slopes.iter().sum::<f64>() / slopes.len() as f64)
        },
    };
    writer.write_json("summary.json", &summary)
}

fn write_per_env(writer: &mut OutputWriter, per_env: &[f64]) -> CliResult<()> {
    let mut csv = Csv::new(&["env_replica", "frequency"]);
    for (r, freq) in per_env.iter().enumerate() {
        csv.row(&[Cell::U64(r as u64), Cell::F64(*freq)]);
    }
    writer.write_text("per_env.csv", &csv.finish())
}

pub fn cmd_survival(config: &ExperimentConfig, writer: &mut OutputWriter) -> CliResult<()> {
    let horizon = config.require_horizon()?;
    let est = survival_probability(
        &config.disorder,
        config.dimension,
        &survival_options(config, horizon),
    )?;
    write_per_env(writer, &est.per_env)?;
    writer.write_json("survival.json", &est)
}

pub fn cmd_local_survival(
    config: &ExperimentConfig,
    writer: &mut OutputWriter,
) -> CliResult<()> {
    let horizon = config.require_horizon()?;
    let dir = config.require_direction()?;
    require_admissible(&dir, horizon, "horizon")?;
    let est = brw::local_survival_probability(
        &config.disorder,
        &dir,
        &survival_options(config, horizon),
    )?;
    write_per_env(writer, &est.survival.per_env)?;
    writer.write_json("local_survival.json", &est)
}

#[derive(Serialize)]
struct FreeEnergySummary {
    estimate: brwre::stats::EstimateWithCI,
    t: u32,
    bounds: FreeEnergyBounds,
}

fn write_free_energy(
    writer: &mut OutputWriter,
    fe: &FreeEnergyEstimate,
    bounds: FreeEnergyBounds,
    csv_name: &str,
    json_name: &str,
    ln_z_column: &str,
) -> CliResult<()> {
    let mut csv = Csv::new(&["replica_id", "t", ln_z_column, "per_step_rate"]);
    for (r, rate) in fe.per_replica.iter().enumerate() {
        csv.row(&[
            Cell::U64(r as u64),
            Cell::U32(fe.t),
            Cell::F64(rate * fe.t as f64),
            Cell::F64(*rate),
        ]);
    }
    writer.write_text(csv_name, &csv.finish())?;
    writer.write_json(
        json_name,
        &FreeEnergySummary {
            estimate: fe.estimate,
            t: fe.t,
            bounds,
        },
    )
}

pub fn cmd_free_energy(config: &ExperimentConfig, writer: &mut OutputWriter) -> CliResult<()> {
    let t = config.require_horizon()?;
    let fe = global_free_energy(&config.disorder, config.dimension, t, config.env_replicas)?;
    let bounds = free_energy_bounds(&config.disorder, &Direction::zero(config.dimension))?;
    write_free_energy(
        writer,
        &fe,
        bounds,
        "free_energy.csv",
        "free_energy.json",
        "ln_Z",
    )
}

pub fn cmd_directional(config: &ExperimentConfig, writer: &mut OutputWriter) -> CliResult<()> {
    let t = config.require_horizon()?;
    let dir = config.require_direction()?;
    require_admissible(&dir, t, "horizon")?;
    let fe = directional_free_energy(&config.disorder, &dir, t, config.env_replicas)?;
    let bounds = free_energy_bounds(&config.disorder, &dir)?;
    write_free_energy(
        writer,
        &fe,
        bounds,
        "directional.csv",
        "directional.json",
        "ln_Z_theta",
    )
}

#[derive(Serialize)]
struct BoundsSummary {
    /// Annealed comparison process: survival upper bound (exact iteration).
    gw: brwre::genfun::GwBound,
    /// Single-site chain lower bound with Monte Carlo error.
    sw_sigma: brwre::stats::EstimateWithCI,
    sw_replicas: u64,
    /// Direct population survival estimate, which the two bounds bracket.
    survival: brwre::brw::SurvivalEstimate,
}

pub fn cmd_bounds(config: &ExperimentConfig, writer: &mut OutputWriter) -> CliResult<()> {
    let horizon = config.require_horizon()?;
    let gw = gw_bound(&config.disorder, horizon.max(512))?;
    let sw = sw_bound(&config.disorder, horizon, config.sw_replicas)?;
    let survival = survival_probability(
        &config.disorder,
        config.dimension,
        &survival_options(config, horizon),
    )?;
    let mut csv = Csv::new(&["t", "sigma", "std_err"]);
    for (t, est) in &sw.sigma_by_t {
        csv.row(&[Cell::U32(*t), Cell::F64(est.mean), Cell::F64(est.std_err)]);
    }
    writer.write_text("sw_ladder.csv", &csv.finish())?;
    writer.write_json(
        "bounds.json",
        &BoundsSummary {
            gw,
            sw_sigma: sw.sigma,
            sw_replicas: sw.replicas,
            survival,
        },
    )
}

#[derive(Serialize)]
struct ExtinctionSummary {
    t_max: u32,
    window_radius: u32,
    /// `delta_t` at the origin for `t = 0..=t_max`; nondecreasing.
    origin_sequence: Vec<f64>,
    final_increment: f64,
    converged: bool,
    /// Extinction probability of the annealed comparison process.
    annealed_extinction: f64,
    /// Distance of the horizon field from stationarity, when the window
    /// leaves room for the shifted comparison (`radius >= t_max + 1`).
    residual: Option<brwre::genfun::FixedPointResidual>,
}

pub fn cmd_extinction_field(
    config: &ExperimentConfig,
    writer: &mut OutputWriter,
) -> CliResult<()> {
    let t_max = config.require_horizon()?;
    let radius = config.window_radius.unwrap_or(t_max);
    if radius < t_max {
        return Err(CliError::config(
            "window_radius",
            format!("must be at least the horizon {t_max}, got {radius}"),
        ));
    }
    let env = EnvironmentField::new(&config.disorder, 0)?;
    let ext = extinction_field(&env, config.dimension, t_max, radius)?;
    let residual = if radius > t_max {
        Some(fixed_point_residual(&env, config.dimension, t_max, radius)?)
    } else {
        None
    };
    let gw = gw_bound(&config.disorder, t_max.max(512))?;
    let mut csv = Csv::new(&["t", "delta"]);
    for (t, delta) in ext.origin_sequence.iter().enumerate() {
        csv.row(&[Cell::U32(t as u32), Cell::F64(*delta)]);
    }
    writer.write_text("origin_sequence.csv", &csv.finish())?;
    writer.write_json(
        "extinction.json",
        &ExtinctionSummary {
            t_max,
            window_radius: radius,
            origin_sequence: ext.origin_sequence,
            final_increment: ext.final_increment,
            converged: ext.converged,
            annealed_extinction: gw.extinction,
            residual,
        },
    )
}

#[derive(Serialize)]
struct EmbeddedSummary {
    replicas: u64,
    block_len: u32,
    blocks: u32,
    /// Mean chain population after each block, over replicas.
    mean_by_block: Vec<f64>,
    /// Fraction of chains extinct by the final block.
    extinct_fraction: f64,
}

pub fn cmd_embedded_sw(config: &ExperimentConfig, writer: &mut OutputWriter) -> CliResult<()> {
    let dir = config.require_direction()?;
    let block_len = config
        .block_len
        .ok_or_else(|| CliError::config("block_len", "required by this subcommand"))?;
    let blocks = config
        .blocks
        .ok_or_else(|| CliError::config("blocks", "required by this subcommand"))?;
    if blocks == 0 {
        return Err(CliError::config("blocks", "must be at least 1"));
    }
    require_admissible(&dir, block_len, "block_len")?;
    let opts = EmbeddedSwOptions {
        block_len,
        blocks,
        cap: config.cap,
    };
    let mut csv = Csv::new(&["replica", "block", "count"]);
    let mut sums = vec![0.0; blocks as usize];
    let mut extinct = 0u64;
    for r in 0..config.env_replicas {
        let env = EnvironmentField::new(&config.disorder, r)?;
        let mut rng = SeedChain::new(config.disorder.master_seed)
            .push(STREAM_CLI_EMB)
            .push(r)
            .rng();
        let chain = embedded_sw(&env, &dir, &opts, &mut rng)?;
        for s in 1..=blocks as usize {
            let count = chain.counts.get(s).copied().unwrap_or(0);
            csv.row(&[Cell::U64(r), Cell::U32(s as u32), Cell::U64(count)]);
            sums[s - 1] += count as f64;
        }
        if chain.counts.last() == Some(&0) {
            extinct += 1;
        }
    }
    writer.write_text("chain.csv", &csv.finish())?;
    writer.write_json(
        "embedded.json",
        &EmbeddedSummary {
            replicas: config.env_replicas,
            block_len,
            blocks,
            mean_by_block: sums
                .iter()
                .map(|s| s / config.env_replicas as f64)
                .collect(),
            extinct_fraction: extinct as f64 / config.env_replicas as f64,
        },
    )
}

#[derive(Serialize)]
struct ConcentrationSummary {
    a: f64,
    delta: f64,
    b: f64,
    replicas: u64,
    decay: Vec<brwre::polymer::TailDecay>,
}

pub fn cmd_concentration(
    config: &ExperimentConfig,
    writer: &mut OutputWriter,
) -> CliResult<()> {
    let horizons = config.require_horizons()?;
    if config.epsilons.is_empty() {
        return Err(CliError::config("epsilons", "required by this subcommand"));
    }
    let report = config.disorder.check_assumptions()?;
    let params = ConcentrationParams::new(report.q_m + report.q_m_inv, 1.0)?;
    let tail = concentration_tail(
        &config.disorder,
        config.dimension,
        &horizons,
        &config.epsilons,
        config.env_replicas,
    )?;
    let mut csv = Csv::new(&["t", "eps", "tail", "mean_ln_z", "bound"]);
    for cell in &tail.cells {
        let bound = concentration_bound(&params, cell.t as u64, cell.eps, BoundForm::ProofDerived)?;
        csv.row(&[
            Cell::U32(cell.t),
            Cell::F64(cell.eps),
            Cell::F64(cell.tail),
            Cell::F64(cell.mean_ln_z),
            Cell::F64(bound),
        ]);
    }
    writer.write_text("concentration.csv", &csv.finish())?;
    writer.write_json(
        "concentration.json",
        &ConcentrationSummary {
            a: params.a,
            delta: params.delta,
            b: params.b,
            replicas: tail.replicas,
            decay: tail.decay,
        },
    )
}

#[derive(Serialize)]
struct VerifyCheck {
    name: &'static str,
    pass: bool,
    observed: f64,
    expected: f64,
    tolerance: f64,
}

#[derive(Serialize)]
struct VerifyReport {
    suite: String,
    checks: Vec<VerifyCheck>,
    all_pass: bool,
}

/// Quick self-check on the constant binary law `{0: 1/4, 2: 3/4}`: the
/// population is then a classical branching process with mean 3/2, so
/// survival, free energy, survivor growth, and extinction all have exact
/// desk values to compare against.
pub fn cmd_verify(
    config: &ExperimentConfig,
    suite: &str,
    writer: &mut OutputWriter,
) -> CliResult<()> {
    if suite != "quick" {
        return Err(CliError::config(
            "suite",
            format!("unknown suite '{suite}'; known suites: quick"),
        ));
    }
    let expected_pmf = [0.25, 0.0, 0.75];
    let atoms = config.disorder.raw_atoms().map_err(|e| CliError::config("disorder", e))?;
    let is_constant_binary = atoms.len() == 1
        && atoms[0].1.len() == 3
        && atoms[0]
            .1
            .iter()
            .zip(expected_pmf)
            .all(|(a, b)| (a - b).abs() < 1e-12);
    if !is_constant_binary {
        return Err(CliError::config(
            "disorder",
            "suite 'quick' is calibrated for the constant binary law \
             {0: 1/4, 2: 3/4}; run it without --config or with that law",
        ));
    }
    let spec = &config.disorder;
    let mut checks = Vec::new();

    let est = survival_probability(
        spec,
        1,
        &SurvivalOptions {
            horizon: 120,
            cap: 100_000,
            env_replicas: 1,
            pop_replicas: 4000,
        },
    )?;
    checks.push(VerifyCheck {
        name: "survival_probability",
        pass: (est.estimate - 2.0 / 3.0).abs() <= 0.03,
        observed: est.estimate,
        expected: 2.0 / 3.0,
        tolerance: 0.03,
    });

    let fe = global_free_energy(spec, 1, 40, 8)?;
    checks.push(VerifyCheck {
        name: "free_energy",
        pass: (fe.estimate.mean - 1.5f64.ln()).abs() <= 1e-9,
        observed: fe.estimate.mean,
        expected: 1.5f64.ln(),
        tolerance: 1e-9,
    });

    let slopes: Vec<f64> = (0..60u64)
        .filter_map(|r| {
            let env = EnvironmentField::new(spec, r).ok()?;
            let mut rng = SeedChain::new(spec.master_seed)
                .push(STREAM_CLI_SIM)
                .push(r)
                .rng();
            let traj = simulate(&env, 1, 120, 100_000, &TrackOptions::default(), &mut rng);
            if traj.survived() {
                growth_rate(&traj, 10).ok().map(|f| f.slope)
            } else {
                None
            }
        })
        .collect();
    let mean_slope = slopes.iter().sum::<f64>() / slopes.len().max(1) as f64;
    checks.push(VerifyCheck {
        name: "survivor_growth_slope",
        pass: !slopes.is_empty() && (mean_slope - 1.5f64.ln()).abs() <= 0.05,
        observed: mean_slope,
        expected: 1.5f64.ln(),
        tolerance: 0.05,
    });

    let env = EnvironmentField::new(spec, 0)?;
    let ext = extinction_field(&env, 1, 40, 40)?;
    let origin = *ext.origin_sequence.last().unwrap();
    checks.push(VerifyCheck {
        name: "extinction_probability",
        pass: (origin - 1.0 / 3.0).abs() <= 1e-9,
        observed: origin,
        expected: 1.0 / 3.0,
        tolerance: 1e-9,
    });

    let all_pass = checks.iter().all(|c| c.pass);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    writer.write_json(
        "report.json",
        &VerifyReport {
            suite: suite.to_string(),
            checks,
            all_pass,
        },
    )?;
    if all_pass {
        Ok(())
    } else {
        Err(CliError::Violation(failed.join(", ")))
    }
}
