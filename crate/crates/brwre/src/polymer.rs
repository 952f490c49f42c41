//! Directed-polymer partition functions in a quenched environment and the
//! free-energy estimators built on them.
//!
//! With `m_{t,x}` the mean offspring at `(t, x)`, the point-to-point
//! partition function obeys the one-step recursion
//!
//! ```text
//! Z_{t+1, y} = sum_x p(x, y) m_{t, x} Z_{t, x},     Z_0 = delta_0,
//! ```
//!
//! where `p` is the uniform nearest-neighbor kernel. `Z_{t,x}` equals the
//! quenched expectation of the particle count at `(t, x)` of the branching
//! walk in the same environment; that identity is the module's strongest
//! cross-check and is exercised by the acceptance suite. All fields are kept
//! in the log domain and reduced with a max-shift log-sum-exp, so horizons
//! far beyond linear-domain overflow are routine.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::env::{DisorderSpec, EnvironmentField};
use crate::error::{Error, Result};
use crate::lattice::{self, Direction, Site, WalkKernel};
use crate::numeric::{log_sum_exp, LOG_ZERO};
use crate::stats::{slope_fit, EstimateWithCI};

/// Sparse field of `ln Z_{t, x}` over the reachable cone
/// `{|x|_1 <= t, |x|_1 == t (mod 2)}`.
#[derive(Clone, Debug)]
pub struct PartitionField {
    t: u32,
    entries: BTreeMap<Site, f64>,
    ln_total: f64,
    d: usize,
}

impl PartitionField {
    /// Unit mass at the origin: `Z_0 = delta_0`.
    pub fn initial(d: usize) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(vec![0i64; d], 0.0);
        PartitionField {
            t: 0,
            entries,
            ln_total: 0.0,
            d,
        }
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    /// `ln sum_x Z_{t,x}`, maintained incrementally.
    pub fn ln_total(&self) -> f64 {
        self.ln_total
    }

    pub fn ln_z(&self, x: &[i64]) -> Option<f64> {
        self.entries.get(x).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Site, f64)> {
        self.entries.iter().map(|(x, &v)| (x, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Recomputes `ln_total` from scratch; the mass-decomposition invariant
    /// says this agrees with the cached value to high precision.
    pub fn recompute_ln_total(&self) -> f64 {
        let vals: Vec<f64> = self.entries.values().copied().collect();
        log_sum_exp(&vals)
    }

    /// One polymer step: push every entry to its `2d` neighbors with weight
    /// `m_{t,x} / 2d` and reduce in the log domain.
    pub fn evolve(&self, env: &EnvironmentField) -> Self {
        let kernel = WalkKernel::new(self.d).expect("field dimension is positive");
        let ln_2d = -kernel.ln_step_prob();
        let mut incoming: BTreeMap<Site, Vec<f64>> = BTreeMap::new();
        for (x, &ln_z) in &self.entries {
            let ln_push = ln_z + env.law_at(self.t, x).ln_mean() - ln_2d;
            for y in kernel.neighbors(x) {
                incoming.entry(y).or_default().push(ln_push);
            }
        }
        let entries: BTreeMap<Site, f64> = incoming
            .into_iter()
            .map(|(y, vs)| (y, log_sum_exp(&vs)))
            .collect();
        let ln_total = {
            let vals: Vec<f64> = entries.values().copied().collect();
            log_sum_exp(&vals)
        };
        PartitionField {
            t: self.t + 1,
            entries,
            ln_total,
            d: self.d,
        }
    }

    /// Runs `evolve` until time `t`.
    pub fn evolved_to(env: &EnvironmentField, d: usize, t: u32) -> Self {
        let mut field = PartitionField::initial(d);
        for _ in 0..t {
            field = field.evolve(env);
        }
        field
    }
}

/// Budget on `(2d)^t` for the enumeration oracle.
const BRUTEFORCE_PATH_LIMIT: u64 = 20_000_000;

/// `ln Z_{t, x}` by explicit summation over all `(2d)^t` walk paths in the
/// linear domain. Exponentially slow by design: it is the independent oracle
/// the dynamic program is validated against. Unreachable targets give
/// [`LOG_ZERO`].
pub fn partition_bruteforce(env: &EnvironmentField, d: usize, t: u32, target: &[i64]) -> Result<f64> {
    let kernel = WalkKernel::new(d)?;
    let moves = kernel.degree() as u64;
    let paths = moves
        .checked_pow(t)
        .filter(|&p| p <= BRUTEFORCE_PATH_LIMIT)
        .ok_or(Error::LimitExceeded {
            what: "bruteforce path enumeration",
            limit: BRUTEFORCE_PATH_LIMIT,
            requested: moves.saturating_pow(t),
        })?;
    let mut total = 0.0f64;
    for code in 0..paths {
        let mut c = code;
        let mut pos = vec![0i64; d];
        let mut weight = 1.0f64;
        for u in 0..t {
            weight *= env.law_at(u, &pos).mean();
            let j = (c % moves) as usize;
            c /= moves;
            pos = kernel.neighbor(&pos, j);
        }
        if pos == target {
            total += weight;
        }
    }
    if total == 0.0 {
        Ok(LOG_ZERO)
    } else {
        Ok(total.ln() - t as f64 * (moves as f64).ln())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum FreeEnergyKind {
    Global,
    Directional { direction: String },
}

/// Monte Carlo free-energy estimate over environment replicas.
#[derive(Clone, Debug, Serialize)]
pub struct FreeEnergyEstimate {
    pub estimate: EstimateWithCI,
    pub t: u32,
    pub kind: FreeEnergyKind,
    /// Per-replica values `(1/t) ln Z`, index = replica id.
    pub per_replica: Vec<f64>,
}

fn replica_values<F>(replicas: u64, f: F) -> Result<Vec<f64>>
where
    F: Fn(u64) -> Result<f64> + Sync + Send,
{
    (0..replicas)
        .into_par_iter()
        .map(f)
        .collect::<Result<Vec<f64>>>()
}

/// `(1/t) ln Z_t` averaged over environment replicas: the finite-horizon
/// estimator of the global quenched free energy. Bounded between
/// `Q[ln m]` and `ln Q[m]` at every horizon.
pub fn global_free_energy(spec: &DisorderSpec, d: usize, t: u32, replicas: u64) -> Result<FreeEnergyEstimate> {
    if t == 0 {
        return Err(Error::OutOfRange {
            name: "t",
            value: 0.0,
            lo: 1.0,
            hi: f64::INFINITY,
        });
    }
    let per_replica = replica_values(replicas, |r| {
        let env = EnvironmentField::new(spec, r)?;
        Ok(PartitionField::evolved_to(&env, d, t).ln_total() / t as f64)
    })?;
    Ok(FreeEnergyEstimate {
        estimate: EstimateWithCI::from_samples(&per_replica)?,
        t,
        kind: FreeEnergyKind::Global,
        per_replica,
    })
}

/// `(1/t) ln Z_{t, t theta}` averaged over environment replicas. The horizon
/// must be admissible for `theta`; the estimator is superadditive in `t` in
/// the mean, hence biased low relative to its `t -> inf` limit.
pub fn directional_free_energy(
    spec: &DisorderSpec,
    dir: &Direction,
    t: u32,
    replicas: u64,
) -> Result<FreeEnergyEstimate> {
    let target = dir.site_at(t)?;
    let d = dir.dimension();
    let per_replica = replica_values(replicas, |r| {
        let env = EnvironmentField::new(spec, r)?;
        let field = PartitionField::evolved_to(&env, d, t);
        let ln_z = field.ln_z(&target).unwrap_or(LOG_ZERO);
        Ok(ln_z / t as f64)
    })?;
    Ok(FreeEnergyEstimate {
        estimate: EstimateWithCI::from_samples(&per_replica)?,
        t,
        kind: FreeEnergyKind::Directional {
            direction: dir.to_string(),
        },
        per_replica,
    })
}

/// Deterministic bracket for the directional free energy:
/// `Q[ln m] - I(theta) <= psi(theta) <= ln Q[m] - I(theta)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FreeEnergyBounds {
    pub lower: f64,
    pub upper: f64,
    pub q_ln_m: f64,
    pub ln_q_m: f64,
    pub rate: f64,
}

pub fn free_energy_bounds(spec: &DisorderSpec, dir: &Direction) -> Result<FreeEnergyBounds> {
    let report = spec.check_assumptions()?;
    let rate = lattice::rate_function(dir);
    Ok(FreeEnergyBounds {
        lower: report.q_ln_m - rate,
        upper: report.q_m.ln() - rate,
        q_ln_m: report.q_ln_m,
        ln_q_m: report.q_m.ln(),
        rate,
    })
}

/// Paired superadditivity comparison of `Q[ln Z]` across horizons `s`, `t`,
/// and `s + t` along a direction.
///
/// Per replica the three values are `ln Z_{s, s theta}(q)`,
/// `ln Z_{t, t theta}(shift_{s, s theta} q)` and `ln Z_{s+t,(s+t) theta}(q)`:
/// restricting the `s + t`-step polymer to pass through `(s, s theta)` shows
/// the gap `D = ln Z_{s+t} - ln Z_s - ln Z_t` is nonnegative replica by
/// replica, and the shift leaves the marginal law of the middle factor
/// unchanged, so the ensemble means still estimate the unshifted
/// expectations.
#[derive(Clone, Debug, Serialize)]
pub struct SuperadditivityReport {
    pub s: u32,
    pub t: u32,
    /// Mean and error of the pathwise gap `D`.
    pub gap: EstimateWithCI,
    pub min_gap: f64,
    /// `mean(D) >= -3 std_err(D)`: the documented acceptance predicate.
    pub holds: bool,
    pub per_replica_gap: Vec<f64>,
}

pub fn superadditivity_check(
    spec: &DisorderSpec,
    dir: &Direction,
    s: u32,
    t: u32,
    replicas: u64,
) -> Result<SuperadditivityReport> {
    let d = dir.dimension();
    let site_s = dir.site_at(s)?;
    let target_t = dir.site_at(t)?;
    let target_st = dir.site_at(s + t)?;
    let gaps = replica_values(replicas, |r| {
        let env = EnvironmentField::new(spec, r)?;
        let ln_z_s = PartitionField::evolved_to(&env, d, s)
            .ln_z(&site_s)
            .unwrap_or(LOG_ZERO);
        let shifted = env.shifted(s, &site_s);
        let ln_z_t = PartitionField::evolved_to(&shifted, d, t)
            .ln_z(&target_t)
            .unwrap_or(LOG_ZERO);
        let ln_z_st = PartitionField::evolved_to(&env, d, s + t)
            .ln_z(&target_st)
            .unwrap_or(LOG_ZERO);
        Ok(ln_z_st - ln_z_s - ln_z_t)
    })?;
    let gap = EstimateWithCI::from_samples(&gaps)?;
    let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(SuperadditivityReport {
        s,
        t,
        holds: gap.mean >= -3.0 * gap.std_err,
        gap,
        min_gap,
        per_replica_gap: gaps,
    })
}

/// Empirical tail of the free-energy deviation at one `(t, eps)` cell:
/// `Q(|ln Z_t - mean| > eps t)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TailCell {
    pub t: u32,
    pub eps: f64,
    pub tail: f64,
    pub mean_ln_z: f64,
}

/// Exponential decay fit of one `eps` row across the horizon ladder.
#[derive(Clone, Debug, Serialize)]
pub struct TailDecay {
    pub eps: f64,
    /// Decay rate of `-ln tail` per unit `t`; `None` when fewer than three
    /// horizons have nonzero tails.
    pub rate: Option<f64>,
    pub rate_std_err: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConcentrationTailReport {
    pub cells: Vec<TailCell>,
    pub decay: Vec<TailDecay>,
    pub replicas: u64,
}

/// Tail frequencies of `|ln Z_t - mean(ln Z_t)| > eps t` over a horizon
/// ladder, with per-`eps` exponential decay fits. Within one horizon the
/// cells share samples, so tails are nested in `eps` by construction.
pub fn concentration_tail(
    spec: &DisorderSpec,
    d: usize,
    horizons: &[u32],
    epsilons: &[f64],
    replicas: u64,
) -> Result<ConcentrationTailReport> {
    if horizons.is_empty() || epsilons.is_empty() {
        return Err(Error::InsufficientData {
            what: "concentration ladder",
            need: 1,
            got: 0,
        });
    }
    if epsilons.iter().any(|&e| e <= 0.0) {
        return Err(Error::OutOfRange {
            name: "eps",
            value: *epsilons.iter().find(|&&e| e <= 0.0).unwrap(),
            lo: f64::MIN_POSITIVE,
            hi: f64::INFINITY,
        });
    }
    let mut cells = Vec::new();
    for &t in horizons {
        let samples = replica_values(replicas, |r| {
            let env = EnvironmentField::new(spec, r)?;
            Ok(PartitionField::evolved_to(&env, d, t).ln_total())
        })?;
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        for &eps in epsilons {
            let exceed = samples
                .iter()
                .filter(|&&v| (v - mean).abs() > eps * t as f64)
                .count();
            cells.push(TailCell {
                t,
                eps,
                tail: exceed as f64 / samples.len() as f64,
                mean_ln_z: mean,
            });
        }
    }
    let decay = epsilons
        .iter()
        .map(|&eps| {
            let pts: Vec<(f64, f64)> = cells
                .iter()
                .filter(|c| c.eps == eps && c.tail > 0.0)
                .map(|c| (c.t as f64, -(c.tail.ln())))
                .collect();
            if pts.len() < 3 {
                return TailDecay {
                    eps,
                    rate: None,
                    rate_std_err: None,
                };
            }
            let (ts, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            match slope_fit(&ts, &ys) {
                Ok(fit) => TailDecay {
                    eps,
                    rate: Some(fit.slope),
                    rate_std_err: Some(fit.std_err),
                },
                Err(_) => TailDecay {
                    eps,
                    rate: None,
                    rate_std_err: None,
                },
            }
        })
        .collect();
    Ok(ConcentrationTailReport {
        cells,
        decay,
        replicas,
    })
}

/// Outcome of the dimension-and-moment disorder classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DisorderRegime {
    /// The normalized population martingale stays uniformly integrable; the
    /// annealed and quenched free energies agree.
    Weak,
    /// The martingale limit vanishes.
    Strong,
    /// Neither sufficient criterion fires at these parameters.
    Undetermined,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeakDisorderReport {
    pub regime: DisorderRegime,
    /// `Q[m^2] / Q[m]^2`, the second-moment ratio entering the weak-disorder
    /// criterion.
    pub moment_ratio: f64,
    /// `1 / pi_d` threshold when `d >= 3`.
    pub inv_return_prob: Option<f64>,
    pub return_prob: Option<lattice::ReturnProbability>,
    /// Entropy criterion statistic `Q[(m / Q[m]) ln(m / Q[m])]`.
    pub tilted_entropy: f64,
    pub ln_2d: f64,
    pub m_constant: bool,
    pub note: String,
}

/// Sufficient-condition classification into weak/strong disorder:
/// `d >= 3` with `Q[m^2]/Q[m]^2 < 1/pi_d` is weak; `d <= 2` with
/// non-constant `m`, or tilted entropy above `ln 2d`, is strong; anything
/// else is reported undetermined. A constant-`m` family has no disorder and
/// is undetermined by convention.
pub fn weak_disorder_check(
    spec: &DisorderSpec,
    d: usize,
    return_t_max: u32,
    return_walkers: u64,
) -> Result<WeakDisorderReport> {
    let atoms = spec.atoms()?;
    let q_m: f64 = atoms.iter().map(|(w, law)| w * law.mean()).sum();
    let q_m2: f64 = atoms.iter().map(|(w, law)| w * law.mean() * law.mean()).sum();
    let tilted_entropy: f64 = atoms
        .iter()
        .map(|(w, law)| {
            let ratio = law.mean() / q_m;
            w * ratio * ratio.ln()
        })
        .sum();
    let moment_ratio = q_m2 / (q_m * q_m);
    let ln_2d = (2.0 * d as f64).ln();
    let mean_spread = atoms
        .iter()
        .map(|(_, law)| (law.mean() - q_m).abs())
        .fold(0.0f64, f64::max);
    let m_constant = mean_spread <= 1e-12 * q_m.max(1.0);

    if m_constant {
        return Ok(WeakDisorderReport {
            regime: DisorderRegime::Undetermined,
            moment_ratio,
            inv_return_prob: None,
            return_prob: None,
            tilted_entropy,
            ln_2d,
            m_constant,
            note: "mean offspring is constant across the family: no disorder, \
                   neither criterion applies"
                .into(),
        });
    }
    if d <= 2 {
        return Ok(WeakDisorderReport {
            regime: DisorderRegime::Strong,
            moment_ratio,
            inv_return_prob: None,
            return_prob: None,
            tilted_entropy,
            ln_2d,
            m_constant,
            note: format!("d = {d} with non-constant mean offspring"),
        });
    }
    let ret = lattice::return_probability(d, return_t_max, return_walkers, spec.master_seed)?;
    let inv_pi = 1.0 / ret.estimate;
    let (regime, note) = if moment_ratio < inv_pi {
        (
            DisorderRegime::Weak,
            format!("second-moment ratio {moment_ratio:.6} below 1/pi_d ~ {inv_pi:.4}"),
        )
    } else if tilted_entropy > ln_2d {
        (
            DisorderRegime::Strong,
            format!("tilted entropy {tilted_entropy:.6} above ln 2d = {ln_2d:.6}"),
        )
    } else {
        (
            DisorderRegime::Undetermined,
            "neither sufficient criterion fires".into(),
        )
    };
    Ok(WeakDisorderReport {
        regime,
        moment_ratio,
        inv_return_prob: Some(inv_pi),
        return_prob: Some(ret),
        tilted_entropy,
        ln_2d,
        m_constant,
        note,
    })
}
