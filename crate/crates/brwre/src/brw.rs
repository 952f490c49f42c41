//! Particle-level simulation of the branching random walk in a quenched
//! environment.
//!
//! Dynamics per time step: every particle at `x` jumps to one of the `2d`
//! neighbors uniformly, then dies and leaves a brood drawn from the
//! offspring law of the site it departed, `q_{t,x}`; the whole brood is
//! deposited at the jump destination. Conditional on the environment,
//! particles act independently.
//!
//! Randomness is consumed in a documented deterministic order: sites in
//! lexicographic order, particles within a site sequentially, and per
//! particle one destination draw followed by one offspring draw. Above
//! [`HISTOGRAM_THRESHOLD`] particles on a site, the per-particle loop is
//! replaced by an offspring-histogram multinomial followed by one
//! destination multinomial per brood size; the deposited-count distribution
//! is identical, which the test suite checks by chi-square comparison.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::env::{DisorderSpec, EnvironmentField};
use crate::error::{Error, Result};
use crate::lattice::{Direction, Site, WalkKernel};
use crate::numeric::{multinomial_split, SeedChain};
use crate::polymer::PartitionField;
use crate::stats::{slope_fit, standard_normal_quantile, EstimateWithCI, SlopeFit};

/// Site occupancy above which one step samples histograms instead of
/// individual particles.
pub const HISTOGRAM_THRESHOLD: u64 = 16;

/// Default hard bound on the live population; trajectories that cross it
/// stop and are counted as survived (the supercritical bias of doing so is
/// reported alongside every estimate that truncates).
pub const DEFAULT_CAP: u64 = 1_000_000;

const STREAM_POP: u64 = 0x504f_5001;
const STREAM_TREE: u64 = 0x5452_4545;
const TAG_JUMP: u64 = 1;
const TAG_OFFSPRING: u64 = 2;

/// Sparse occupation counts at a fixed time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PopulationState {
    t: u32,
    counts: BTreeMap<Site, u64>,
    total: u64,
    d: usize,
}

impl PopulationState {
    /// One particle at the origin at time zero.
    pub fn initial(d: usize) -> Self {
        Self::singleton(d, 0, vec![0; d], 1)
    }

    /// `n` particles at `site` at absolute time `t`; the entry point for
    /// restarted sub-simulations.
    pub fn singleton(d: usize, t: u32, site: Site, n: u64) -> Self {
        debug_assert_eq!(site.len(), d);
        let mut counts = BTreeMap::new();
        if n > 0 {
            counts.insert(site, n);
        }
        PopulationState {
            t,
            counts,
            total: n,
            d,
        }
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_extinct(&self) -> bool {
        self.total == 0
    }

    pub fn count_at(&self, x: &[i64]) -> u64 {
        self.counts.get(x).copied().unwrap_or(0)
    }

    pub fn sites(&self) -> impl Iterator<Item = (&Site, u64)> {
        self.counts.iter().map(|(x, &n)| (x, n))
    }

    pub fn occupied_sites(&self) -> usize {
        self.counts.len()
    }
}

/// Advances the population one step with the default vectorization
/// threshold.
pub fn step<R: Rng + ?Sized>(
    pop: &PopulationState,
    env: &EnvironmentField,
    rng: &mut R,
) -> PopulationState {
    step_with_threshold(pop, env, rng, HISTOGRAM_THRESHOLD)
}

/// One step with an explicit threshold; `u64::MAX` forces the per-particle
/// path and `0` forces the histogram path. Both consume `rng` in the
/// documented order and generate the same deposited-count distribution.
pub fn step_with_threshold<R: Rng + ?Sized>(
    pop: &PopulationState,
    env: &EnvironmentField,
    rng: &mut R,
    threshold: u64,
) -> PopulationState {
    let kernel = WalkKernel::new(pop.d).expect("population dimension is positive");
    let degree = kernel.degree();
    let uniform_moves = vec![1.0; degree];
    let mut next: BTreeMap<Site, u64> = BTreeMap::new();
    let mut total = 0u64;
    for (x, &n) in &pop.counts {
        let law = env.law_at(pop.t, x);
        if n <= threshold {
            for _ in 0..n {
                let j = rng.gen_range(0..degree);
                let k = law.sample(rng);
                if k > 0 {
                    *next.entry(kernel.neighbor(x, j)).or_insert(0) += k;
                    total += k;
                }
            }
        } else {
            let brood_hist = multinomial_split(rng, n, law.pmf());
            for (k, &parents) in brood_hist.iter().enumerate().skip(1) {
                if parents == 0 {
                    continue;
                }
                let dests = multinomial_split(rng, parents, &uniform_moves);
                for (j, &c) in dests.iter().enumerate() {
                    if c > 0 {
                        let deposit = k as u64 * c;
                        *next.entry(kernel.neighbor(x, j)).or_insert(0) += deposit;
                        total += deposit;
                    }
                }
            }
        }
    }
    PopulationState {
        t: pop.t + 1,
        counts: next,
        total,
        d: pop.d,
    }
}

/// Terminal state of a simulated trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SimStatus {
    /// Population hit zero at time `t`; extinction is absorbing.
    Extinct { t: u32 },
    AliveAtHorizon,
    /// Population exceeded the cap at time `t`; treated as survived.
    Capped { t: u32 },
}

/// Optional per-step observables recorded by [`simulate`].
#[derive(Clone, Debug, Default)]
pub struct TrackOptions {
    /// Co-evolve the partition field of the same environment and record the
    /// count-to-mean ratio `|B_t| / Z_t`.
    pub partition: bool,
    /// Record the occupation of `t * theta` at admissible times.
    pub direction: Option<Direction>,
    /// Record `W_t = |B_t| / mbar^t` for this annealed mean `mbar`.
    pub annealed_mean: Option<f64>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TrajectoryPoint {
    pub t: u32,
    pub total: u64,
    /// Occupation of the milestone site, at milestone times only.
    pub local: Option<u64>,
    /// Normalized population `W_t`.
    pub w: Option<f64>,
    /// `|B_t| / Z_t` under the same environment.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub status: SimStatus,
}

impl Trajectory {
    /// Alive at the horizon or stopped by the cap.
    pub fn survived(&self) -> bool {
        !matches!(self.status, SimStatus::Extinct { .. })
    }

    pub fn final_t(&self) -> u32 {
        self.points.last().map(|p| p.t).unwrap_or(0)
    }
}

/// Runs the walk from a single ancestor at the origin to `horizon`,
/// stopping early at extinction or at the population cap.
pub fn simulate<R: Rng + ?Sized>(
    env: &EnvironmentField,
    d: usize,
    horizon: u32,
    cap: u64,
    track: &TrackOptions,
    rng: &mut R,
) -> Trajectory {
    let mut pop = PopulationState::initial(d);
    let mut field = track.partition.then(|| PartitionField::initial(d));
    let mut points = Vec::with_capacity(horizon as usize + 1);
    let record =
        |pop: &PopulationState, field: &Option<PartitionField>| -> TrajectoryPoint {
            let local = track.direction.as_ref().and_then(|dir| {
                pop.t().is_multiple_of(dir.period())
                    .then(|| pop.count_at(&dir.site_at(pop.t()).expect("milestone is admissible")))
            });
            let w = track
                .annealed_mean
                .map(|mbar| pop.total() as f64 / mbar.powi(pop.t() as i32));
            let ratio = field.as_ref().map(|f| {
                if pop.total() == 0 {
                    0.0
                } else {
                    ((pop.total() as f64).ln() - f.ln_total()).exp()
                }
            });
            TrajectoryPoint {
                t: pop.t(),
                total: pop.total(),
                local,
                w,
                ratio,
            }
        };
    points.push(record(&pop, &field));
    let mut status = SimStatus::AliveAtHorizon;
    for _ in 0..horizon {
        pop = step(&pop, env, rng);
        if let Some(f) = field.take() {
            field = Some(f.evolve(env));
        }
        points.push(record(&pop, &field));
        if pop.is_extinct() {
            status = SimStatus::Extinct { t: pop.t() };
            break;
        }
        if pop.total() > cap {
            status = SimStatus::Capped { t: pop.t() };
            break;
        }
    }
    Trajectory { points, status }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SurvivalOptions {
    pub horizon: u32,
    pub cap: u64,
    pub env_replicas: u64,
    pub pop_replicas: u64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpreadQuantiles {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl SpreadQuantiles {
    fn from_sorted(sorted: &[f64]) -> Self {
        let at = |q: f64| {
            let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
            sorted[idx]
        };
        SpreadQuantiles {
            min: sorted[0],
            q25: at(0.25),
            median: at(0.5),
            q75: at(0.75),
            max: sorted[sorted.len() - 1],
        }
    }
}

/// Two-level survival estimate: annealed mean over environment replicas of
/// the per-environment (quenched) survival frequency, with the quenched
/// spread reported through quantiles.
#[derive(Clone, Debug, Serialize)]
pub struct SurvivalEstimate {
    pub estimate: f64,
    pub std_err: f64,
    /// 99% normal interval.
    pub ci: (f64, f64),
    /// Fraction of all trajectories stopped by the cap (and therefore
    /// declared survived without reaching the horizon).
    pub capped_fraction: f64,
    pub env_spread: SpreadQuantiles,
    pub per_env: Vec<f64>,
    pub options: SurvivalOptions,
}

fn survival_core(
    spec: &DisorderSpec,
    d: usize,
    opts: &SurvivalOptions,
    milestones: Option<&Direction>,
) -> Result<(Vec<f64>, f64)> {
    if opts.env_replicas == 0 || opts.pop_replicas == 0 {
        return Err(Error::InsufficientData {
            what: "survival replicas",
            need: 1,
            got: 0,
        });
    }
    let results: Vec<Result<(f64, u64)>> = (0..opts.env_replicas)
        .into_par_iter()
        .map(|e| {
            let env = EnvironmentField::new(spec, e)?;
            let mut survived = 0u64;
            let mut capped = 0u64;
            for p in 0..opts.pop_replicas {
                let mut rng = SeedChain::new(spec.master_seed)
                    .push(STREAM_POP)
                    .push(e)
                    .push(p)
                    .rng();
                let mut pop = PopulationState::initial(d);
                let mut alive = true;
                'steps: for _ in 0..opts.horizon {
                    pop = step(&pop, &env, &mut rng);
                    if pop.is_extinct() {
                        alive = false;
                        break 'steps;
                    }
                    if let Some(dir) = milestones {
                        if pop.t().is_multiple_of(dir.period())
                            && pop.count_at(&dir.site_at(pop.t())?) == 0
                        {
                            alive = false;
                            break 'steps;
                        }
                    }
                    if pop.total() > opts.cap {
                        capped += 1;
                        break 'steps;
                    }
                }
                if alive {
                    survived += 1;
                }
            }
            Ok((
                survived as f64 / opts.pop_replicas as f64,
                capped,
            ))
        })
        .collect();
    let mut per_env = Vec::with_capacity(results.len());
    let mut capped_total = 0u64;
    for r in results {
        let (freq, capped) = r?;
        per_env.push(freq);
        capped_total += capped;
    }
    let capped_fraction =
        capped_total as f64 / (opts.env_replicas * opts.pop_replicas) as f64;
    Ok((per_env, capped_fraction))
}

fn survival_summary(
    per_env: Vec<f64>,
    capped_fraction: f64,
    opts: &SurvivalOptions,
) -> SurvivalEstimate {
    let estimate = per_env.iter().sum::<f64>() / per_env.len() as f64;
    let std_err = if per_env.len() >= 2 {
        let var = per_env
            .iter()
            .map(|f| (f - estimate).powi(2))
            .sum::<f64>()
            / (per_env.len() - 1) as f64;
        (var / per_env.len() as f64).sqrt()
    } else {
        // Single environment: binomial error over population replicas.
        (estimate * (1.0 - estimate) / opts.pop_replicas as f64).sqrt()
    };
    let z = standard_normal_quantile(0.995).expect("fixed confidence level");
    let mut sorted = per_env.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    SurvivalEstimate {
        estimate,
        std_err,
        ci: (estimate - z * std_err, estimate + z * std_err),
        capped_fraction,
        env_spread: SpreadQuantiles::from_sorted(&sorted),
        per_env,
        options: *opts,
    }
}

/// Probability that the population is alive at the horizon (capped runs
/// count as alive).
pub fn survival_probability(
    spec: &DisorderSpec,
    d: usize,
    opts: &SurvivalOptions,
) -> Result<SurvivalEstimate> {
    let (per_env, capped) = survival_core(spec, d, opts, None)?;
    Ok(survival_summary(per_env, capped, opts))
}

/// Local survival along a direction with a path-forcing lower bound.
#[derive(Clone, Debug, Serialize)]
pub struct LocalSurvivalEstimate {
    pub survival: SurvivalEstimate,
    /// Mean over environments of `ln prod_t (1 - q_{t, x_t}(0)) / 2d` along
    /// the canonical milestone path: the quenched path-forcing bound.
    pub forced_path_ln_bound: f64,
    /// Linear-domain version of the bound (may underflow for long horizons).
    pub forced_path_bound: f64,
}

/// Nearest-neighbor path visiting `r n theta` at every time `r n`: within
/// each block, first walk each coordinate toward its target, then burn the
/// even slack zigzagging along the first axis.
fn milestone_path(dir: &Direction, horizon: u32) -> Result<Vec<Site>> {
    let n = dir.period();
    let mut path = vec![dir.site_at(0)?];
    for r in 0..horizon / n {
        let from = dir.site_at(r * n)?;
        let to = dir.site_at((r + 1) * n)?;
        let mut x = from.clone();
        for axis in 0..x.len() {
            while x[axis] != to[axis] {
                x[axis] += (to[axis] - x[axis]).signum();
                path.push(x.clone());
            }
        }
        let used: i64 = from
            .iter()
            .zip(&to)
            .map(|(a, b)| (b - a).abs())
            .sum();
        let slack = n as i64 - used;
        debug_assert!(slack >= 0 && slack % 2 == 0);
        for _ in 0..slack / 2 {
            x[0] += 1;
            path.push(x.clone());
            x[0] -= 1;
            path.push(x.clone());
        }
    }
    Ok(path)
}

/// Probability that the milestone site `t * theta` is occupied at every
/// admissible `t <= horizon`. The horizon must itself be admissible.
pub fn local_survival_probability(
    spec: &DisorderSpec,
    dir: &Direction,
    opts: &SurvivalOptions,
) -> Result<LocalSurvivalEstimate> {
    if !dir.is_admissible(opts.horizon) {
        return Err(Error::InadmissibleHorizon {
            t: opts.horizon,
            direction: dir.to_string(),
            period: dir.period(),
        });
    }
    let d = dir.dimension();
    let (per_env, capped) = survival_core(spec, d, opts, Some(dir))?;
    let survival = survival_summary(per_env, capped, opts);

    let path = milestone_path(dir, opts.horizon)?;
    let ln_2d = (2.0 * d as f64).ln();
    let ln_bounds: Vec<f64> = (0..opts.env_replicas)
        .into_par_iter()
        .map(|e| {
            let env = EnvironmentField::new(spec, e)?;
            Ok((0..opts.horizon)
                .map(|t| {
                    let q0 = env.law_at(t, &path[t as usize]).q0();
                    (1.0 - q0).ln() - ln_2d
                })
                .sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    let forced_path_ln_bound = ln_bounds.iter().sum::<f64>() / ln_bounds.len() as f64;
    let forced_path_bound =
        ln_bounds.iter().map(|b| b.exp()).sum::<f64>() / ln_bounds.len() as f64;
    Ok(LocalSurvivalEstimate {
        survival,
        forced_path_ln_bound,
        forced_path_bound,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EmbeddedSwOptions {
    /// Block length `T`; must be admissible for the direction.
    pub block_len: u32,
    /// Number of blocks to run.
    pub blocks: u32,
    /// Hard budget on any intermediate population; exceeding it is an error
    /// because truncation would bias the chain law.
    pub cap: u64,
}

/// Single-site branching chain embedded in the walk: block `s` restarts one
/// `T`-step sub-simulation per chain particle from `((s-1)T, (s-1)T theta)`
/// in the same environment and counts arrivals at `(sT, sT theta)`.
#[derive(Clone, Debug, Serialize)]
pub struct EmbeddedSwChain {
    /// `counts[s]` is the chain population after `s` blocks; `counts[0] = 1`.
    pub counts: Vec<u64>,
    /// Per block, the offspring of each chain particle, in order.
    pub block_offspring: Vec<Vec<u64>>,
}

pub fn embedded_sw<R: Rng + ?Sized>(
    env: &EnvironmentField,
    dir: &Direction,
    opts: &EmbeddedSwOptions,
    rng: &mut R,
) -> Result<EmbeddedSwChain> {
    if !dir.is_admissible(opts.block_len) {
        return Err(Error::InadmissibleHorizon {
            t: opts.block_len,
            direction: dir.to_string(),
            period: dir.period(),
        });
    }
    let d = dir.dimension();
    let t_block = opts.block_len;
    let mut counts = vec![1u64];
    let mut block_offspring = Vec::new();
    for s in 1..=opts.blocks {
        let parents = counts[s as usize - 1];
        if parents == 0 {
            counts.push(0);
            block_offspring.push(Vec::new());
            continue;
        }
        if parents > opts.cap {
            return Err(Error::CapExceeded {
                what: "embedded chain parents",
                cap: opts.cap,
            });
        }
        let start_t = (s - 1) * t_block;
        let start_site = dir.site_at(start_t)?;
        let target = dir.site_at(s * t_block)?;
        let mut offspring = Vec::with_capacity(parents as usize);
        for _ in 0..parents {
            let mut pop = PopulationState::singleton(d, start_t, start_site.clone(), 1);
            for _ in 0..t_block {
                pop = step(&pop, env, rng);
                if pop.total() > opts.cap {
                    return Err(Error::CapExceeded {
                        what: "embedded chain sub-simulation",
                        cap: opts.cap,
                    });
                }
                if pop.is_extinct() {
                    break;
                }
            }
            offspring.push(pop.count_at(&target));
        }
        counts.push(offspring.iter().sum());
        block_offspring.push(offspring);
    }
    Ok(EmbeddedSwChain {
        counts,
        block_offspring,
    })
}

/// Paired milestone counts from one coupled run: the embedded chain rebuilt
/// by restarted sub-simulations, and the full population, both driven by
/// the same genealogy-indexed counter randomness.
#[derive(Clone, Debug, Serialize)]
pub struct DominationRun {
    /// `embedded[s]` vs `full[s]` at milestone `s = 1..=blocks`.
    pub embedded: Vec<u64>,
    pub full: Vec<u64>,
}

/// Move and brood for the particle with genealogy chain `label` departing
/// `(t, x)`: pure functions of `(label, t, x)`, identical in every run that
/// shares the master seed.
fn coupled_jump(label: SeedChain, t: u32, x: &[i64], degree: usize) -> usize {
    let u = label.push(TAG_JUMP).push(u64::from(t)).push_coords(x).unit();
    ((u * degree as f64) as usize).min(degree - 1)
}

fn coupled_offspring(
    label: SeedChain,
    t: u32,
    x: &[i64],
    law: &crate::env::OffspringLaw,
) -> u64 {
    let u = label.push(TAG_OFFSPRING).push(u64::from(t)).push_coords(x).unit();
    law.sample_from_unit(u)
}

fn coupled_substep(
    particles: Vec<(Site, SeedChain)>,
    env: &EnvironmentField,
    kernel: &WalkKernel,
    t: u32,
    cap: u64,
) -> Result<Vec<(Site, SeedChain)>> {
    let mut next = Vec::new();
    for (x, label) in particles {
        let law = env.law_at(t, &x);
        let j = coupled_jump(label, t, &x, kernel.degree());
        let k = coupled_offspring(label, t, &x, law);
        let dest = kernel.neighbor(&x, j);
        for child in 0..k {
            next.push((dest.clone(), label.push(child)));
        }
        if next.len() as u64 > cap {
            return Err(Error::CapExceeded {
                what: "coupled domination run",
                cap,
            });
        }
    }
    Ok(next)
}

/// Runs the full walk and the restarted embedded chain on the same coupled
/// randomness and reports both milestone counts. Every sub-simulation
/// replays the corresponding subtree of the full run exactly, so the
/// embedded count can never exceed the full count; the pairing exists to
/// let tests verify that the two independently coded constructions agree
/// with that order.
pub fn embedded_domination_run(
    spec: &DisorderSpec,
    dir: &Direction,
    opts: &EmbeddedSwOptions,
    env_replica: u64,
) -> Result<DominationRun> {
    if !dir.is_admissible(opts.block_len) {
        return Err(Error::InadmissibleHorizon {
            t: opts.block_len,
            direction: dir.to_string(),
            period: dir.period(),
        });
    }
    let d = dir.dimension();
    let env = EnvironmentField::new(spec, env_replica)?;
    let kernel = WalkKernel::new(d)?;
    let root = SeedChain::new(spec.master_seed)
        .push(STREAM_TREE)
        .push(env_replica);

    // Full run, label-tracked.
    let mut full_particles: Vec<(Site, SeedChain)> = vec![(vec![0; d], root)];
    let mut full = Vec::new();
    for t in 0..opts.blocks * opts.block_len {
        full_particles = coupled_substep(full_particles, &env, &kernel, t, opts.cap)?;
        if (t + 1) % opts.block_len == 0 {
            let milestone = dir.site_at(t + 1)?;
            full.push(
                full_particles
                    .iter()
                    .filter(|(x, _)| *x == milestone)
                    .count() as u64,
            );
        }
    }

    // Embedded chain: restart one sub-simulation per surviving label.
    let mut labels: Vec<SeedChain> = vec![root];
    let mut embedded = Vec::new();
    for s in 1..=opts.blocks {
        let start_t = (s - 1) * opts.block_len;
        let start_site = dir.site_at(start_t)?;
        let target = dir.site_at(s * opts.block_len)?;
        let mut arrived: Vec<SeedChain> = Vec::new();
        for label in labels {
            let mut sub: Vec<(Site, SeedChain)> = vec![(start_site.clone(), label)];
            for u in 0..opts.block_len {
                sub = coupled_substep(sub, &env, &kernel, start_t + u, opts.cap)?;
            }
            arrived.extend(
                sub.into_iter()
                    .filter(|(x, _)| *x == target)
                    .map(|(_, l)| l),
            );
        }
        embedded.push(arrived.len() as u64);
        labels = arrived;
    }
    Ok(DominationRun { embedded, full })
}

/// Ensemble martingale diagnostics over tracked trajectories.
#[derive(Clone, Debug, Serialize)]
pub struct MartingaleDiagnostics {
    pub times: Vec<u32>,
    /// Mean of `W_t` across trajectories, extinct ones contributing zero.
    pub w_mean: Vec<EstimateWithCI>,
    /// Terminal `W` over trajectories still alive at their last point.
    pub surviving_final_w: Option<EstimateWithCI>,
    /// Trajectories dropped because the cap stopped them before the last
    /// requested time; a nonzero count biases `w_mean` and is surfaced.
    pub excluded_capped: usize,
}

pub fn martingale_track(trajs: &[Trajectory], times: &[u32]) -> Result<MartingaleDiagnostics> {
    let max_t = times.iter().copied().max().unwrap_or(0);
    let mut usable = Vec::new();
    let mut excluded_capped = 0usize;
    for traj in trajs {
        match traj.status {
            SimStatus::Capped { t } if t < max_t => excluded_capped += 1,
            SimStatus::AliveAtHorizon if traj.final_t() < max_t => {
                return Err(Error::InsufficientData {
                    what: "trajectory horizon below requested martingale time",
                    need: max_t as usize,
                    got: traj.final_t() as usize,
                })
            }
            _ => usable.push(traj),
        }
    }
    if usable.len() < 2 {
        return Err(Error::InsufficientData {
            what: "martingale trajectories",
            need: 2,
            got: usable.len(),
        });
    }
    let mut w_mean = Vec::with_capacity(times.len());
    for &t in times {
        let samples: Vec<f64> = usable
            .iter()
            .map(|traj| {
                traj.points
                    .get(t as usize)
                    .map(|p| {
                        debug_assert_eq!(p.t, t);
                        p.w.ok_or(Error::InsufficientData {
                            what: "tracked martingale values",
                            need: 1,
                            got: 0,
                        })
                    })
                    .unwrap_or(Ok(0.0))
            })
            .collect::<Result<Vec<f64>>>()?;
        w_mean.push(EstimateWithCI::from_samples(&samples)?);
    }
    let finals: Vec<f64> = usable
        .iter()
        .filter(|traj| traj.survived())
        .filter_map(|traj| traj.points.last().and_then(|p| p.w))
        .collect();
    let surviving_final_w = if finals.len() >= 2 {
        Some(EstimateWithCI::from_samples(&finals)?)
    } else {
        None
    };
    Ok(MartingaleDiagnostics {
        times: times.to_vec(),
        w_mean,
        surviving_final_w,
        excluded_capped,
    })
}

/// Least-squares growth rate of `ln |B_t|` over `t >= t_min`, using only
/// strictly positive populations.
pub fn growth_rate(traj: &Trajectory, t_min: u32) -> Result<SlopeFit> {
    let (ts, ys): (Vec<f64>, Vec<f64>) = traj
        .points
        .iter()
        .filter(|p| p.t >= t_min && p.total > 0)
        .map(|p| (p.t as f64, (p.total as f64).ln()))
        .unzip();
    slope_fit(&ts, &ys)
}
