//! Space-time i.i.d. offspring environments.
//!
//! A disorder specification is a finite weighted family of offspring laws.
//! An environment realization assigns one law of the family to every
//! space-time site `(t, x)` independently. The assignment here is
//! counter-based: the law index at `(t, x)` is a pure function of
//! `(master_seed, replica_id, t, x)`, so a replica's whole field is
//! reproducible in O(1) memory, any slab can be rematerialized bit-for-bit,
//! and concurrent readers need no synchronization.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::SeedChain;

/// Default truncation for unbounded offspring families.
pub const DEFAULT_K_MAX: usize = 64;

/// Normalization slack allowed on a pmf.
pub const PMF_TOLERANCE: f64 = 1e-12;

const STREAM_ENV: u64 = 0x454e_5601;

/// Offspring distribution on `{0, 1, ..., k_max}` with cached moments.
///
/// Invariants enforced at construction: entries in `[0, 1]`, total mass `1`
/// within [`PMF_TOLERANCE`], and mean `m > 0` so that `ln m` is finite.
#[derive(Clone, Debug, PartialEq)]
pub struct OffspringLaw {
    pmf: Vec<f64>,
    cdf: Vec<f64>,
    mean: f64,
    second_moment: f64,
    ln_mean: f64,
    q0: f64,
}

/// Raw moment summation used both for the cached fields and for assumption
/// reports on laws that may violate `m > 0`.
fn pmf_moments(pmf: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut second = 0.0;
    for (k, &p) in pmf.iter().enumerate() {
        mean += k as f64 * p;
        second += (k * k) as f64 * p;
    }
    (mean, second)
}

fn validate_pmf(pmf: &[f64]) -> Result<()> {
    if pmf.is_empty() {
        return Err(Error::InvalidLaw("empty pmf".into()));
    }
    for (k, &p) in pmf.iter().enumerate() {
        if !(0.0..=1.0 + PMF_TOLERANCE).contains(&p) || !p.is_finite() {
            return Err(Error::InvalidLaw(format!("pmf[{k}] = {p} outside [0, 1]")));
        }
    }
    let total: f64 = pmf.iter().sum();
    if (total - 1.0).abs() > PMF_TOLERANCE {
        return Err(Error::InvalidLaw(format!(
            "pmf sums to {total}, outside 1 +- {PMF_TOLERANCE}"
        )));
    }
    Ok(())
}

impl OffspringLaw {
    pub fn new(pmf: Vec<f64>) -> Result<Self> {
        validate_pmf(&pmf)?;
        let (mean, second_moment) = pmf_moments(&pmf);
        if mean <= 0.0 {
            return Err(Error::InvalidLaw(format!(
                "mean offspring {mean} must be positive"
            )));
        }
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for &p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        Ok(OffspringLaw {
            ln_mean: mean.ln(),
            q0: pmf[0],
            mean,
            second_moment,
            pmf,
            cdf,
        })
    }

    /// Law `{0 -> 1 - p, 2 -> p}`: each particle doubles with probability
    /// `p`, else dies.
    pub fn binary_branching(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange {
                name: "p",
                value: p,
                lo: 0.0,
                hi: 1.0,
            });
        }
        OffspringLaw::new(vec![1.0 - p, 0.0, p])
    }

    /// Poisson(`lambda`) truncated to `{0, ..., k_max}` and renormalized.
    pub fn truncated_poisson(lambda: f64, k_max: usize) -> Result<Self> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::OutOfRange {
                name: "lambda",
                value: lambda,
                lo: f64::MIN_POSITIVE,
                hi: f64::INFINITY,
            });
        }
        // Unnormalized terms built by the stable ratio recursion
        // p_{k+1} = p_k * lambda / (k + 1).
        let mut terms = Vec::with_capacity(k_max + 1);
        let mut term = 1.0f64;
        for k in 0..=k_max {
            terms.push(term);
            term *= lambda / (k + 1) as f64;
        }
        let total: f64 = terms.iter().sum();
        let pmf: Vec<f64> = terms.into_iter().map(|v| v / total).collect();
        OffspringLaw::new(pmf)
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn k_max(&self) -> usize {
        self.pmf.len() - 1
    }

    /// Mean offspring number `m`.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Second moment `E[k^2]`.
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    pub fn ln_mean(&self) -> f64 {
        self.ln_mean
    }

    /// Extinction-in-one-step mass `q(0)`.
    pub fn q0(&self) -> f64 {
        self.q0
    }

    /// Generating function `sum_k q(k) s^k` on `[0, 1]`, with `0^0 = 1`
    /// (Horner evaluation has no `powf`, so `s = 0` yields exactly `q(0)`).
    pub fn generating(&self, s: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&s));
        self.pmf.iter().rev().fold(0.0, |acc, &p| acc * s + p)
    }

    /// Inverse-cdf sample consuming one uniform from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.sample_from_unit(rng.gen::<f64>())
    }

    /// Inverse-cdf sample from a caller-supplied uniform: the counter-based
    /// entry point used when randomness is indexed rather than streamed.
    pub fn sample_from_unit(&self, u: f64) -> u64 {
        self.cdf.partition_point(|&c| c <= u) as u64
    }
}

/// Finite weighted family that site laws are drawn from.
///
/// Every family reduces to an explicit atom list, so environment-level
/// expectations are exact finite sums rather than Monte Carlo estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DisorderFamily {
    /// Single law at every site: no disorder.
    Deterministic { pmf: Vec<f64> },
    /// `law_a` with probability `weight_a`, else `law_b`.
    TwoPoint {
        law_a: Vec<f64>,
        law_b: Vec<f64>,
        weight_a: f64,
    },
    /// Binary branching `{0 -> 1 - p, 2 -> p}` with `p` uniform on an
    /// evenly spaced grid of `grid` points spanning `[p_lo, p_hi]`.
    BinaryBranching { p_lo: f64, p_hi: f64, grid: usize },
    /// Truncated Poisson laws with the given rates and selection weights.
    TruncatedPoisson {
        lambdas: Vec<f64>,
        weights: Vec<f64>,
    },
}

fn default_k_max() -> usize {
    DEFAULT_K_MAX
}

/// Disorder family plus the master seed that fixes the whole ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    #[serde(flatten)]
    pub family: DisorderFamily,
    /// Truncation bound for unbounded families; bounded laws must fit it.
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    pub master_seed: u64,
}

impl DisorderSpec {
    pub fn new(family: DisorderFamily, master_seed: u64) -> Self {
        DisorderSpec {
            family,
            k_max: DEFAULT_K_MAX,
            master_seed,
        }
    }

    /// Weighted raw pmfs of the family. Always constructible; degenerate
    /// atoms (zero mean) are allowed here so that assumption checks can
    /// report on them instead of failing.
    pub fn raw_atoms(&self) -> Result<Vec<(f64, Vec<f64>)>> {
        match &self.family {
            DisorderFamily::Deterministic { pmf } => {
                validate_pmf(pmf)?;
                Ok(vec![(1.0, pmf.clone())])
            }
            DisorderFamily::TwoPoint {
                law_a,
                law_b,
                weight_a,
            } => {
                if !(0.0..=1.0).contains(weight_a) {
                    return Err(Error::InvalidSpec(format!(
                        "weight_a = {weight_a} outside [0, 1]"
                    )));
                }
                validate_pmf(law_a)?;
                validate_pmf(law_b)?;
                Ok(vec![(*weight_a, law_a.clone()), (1.0 - weight_a, law_b.clone())])
            }
            DisorderFamily::BinaryBranching { p_lo, p_hi, grid } => {
                if *grid == 0 {
                    return Err(Error::InvalidSpec("grid must be nonempty".into()));
                }
                if !(0.0..=1.0).contains(p_lo) || !(0.0..=1.0).contains(p_hi) || p_lo > p_hi {
                    return Err(Error::InvalidSpec(format!(
                        "need 0 <= p_lo <= p_hi <= 1, got [{p_lo}, {p_hi}]"
                    )));
                }
                let w = 1.0 / *grid as f64;
                Ok((0..*grid)
                    .map(|i| {
                        let frac = if *grid == 1 {
                            0.0
                        } else {
                            i as f64 / (*grid - 1) as f64
                        };
                        let p = p_lo + (p_hi - p_lo) * frac;
                        (w, vec![1.0 - p, 0.0, p])
                    })
                    .collect())
            }
            DisorderFamily::TruncatedPoisson { lambdas, weights } => {
                if lambdas.is_empty() || lambdas.len() != weights.len() {
                    return Err(Error::InvalidSpec(format!(
                        "need matching nonempty grids, got {} rates and {} weights",
                        lambdas.len(),
                        weights.len()
                    )));
                }
                let total: f64 = weights.iter().sum();
                if weights.iter().any(|w| *w < 0.0) || (total - 1.0).abs() > PMF_TOLERANCE {
                    return Err(Error::InvalidSpec(format!(
                        "weights must be nonnegative and sum to 1, got total {total}"
                    )));
                }
                lambdas
                    .iter()
                    .zip(weights)
                    .map(|(&lambda, &w)| {
                        let law = OffspringLaw::truncated_poisson(lambda, self.k_max)?;
                        Ok((w, law.pmf().to_vec()))
                    })
                    .collect()
            }
        }
    }

    /// Validated atom laws. Fails if any atom violates the `m > 0` contract
    /// or exceeds `k_max`.
    pub fn atoms(&self) -> Result<Vec<(f64, OffspringLaw)>> {
        self.raw_atoms()?
            .into_iter()
            .map(|(w, pmf)| {
                if pmf.len() > self.k_max + 1 {
                    return Err(Error::InvalidSpec(format!(
                        "atom support {} exceeds k_max {}",
                        pmf.len() - 1,
                        self.k_max
                    )));
                }
                Ok((w, OffspringLaw::new(pmf)?))
            })
            .collect()
    }

    /// Exact environment-level moments and standing-assumption flags.
    /// Violations (an atom with `m = 0` or `q(0) = 1`) are reported through
    /// the flags rather than raised, so degenerate specs remain inspectable.
    pub fn check_assumptions(&self) -> Result<AssumptionReport> {
        let atoms = self.raw_atoms()?;
        let mut report = AssumptionReport {
            q_ln_m: 0.0,
            q_m: 0.0,
            q_m_inv: 0.0,
            q_ln_m2: 0.0,
            q_ln_inv_surv_mass: 0.0,
            hyp1_ok: true,
            cond_1q0_ok: true,
            k2_ok: true,
        };
        for (w, pmf) in &atoms {
            let (m, m2) = pmf_moments(pmf);
            let q0 = pmf[0];
            if m <= 0.0 {
                report.hyp1_ok = false;
            }
            if m2 <= 0.0 {
                report.k2_ok = false;
            }
            if q0 >= 1.0 - PMF_TOLERANCE {
                report.cond_1q0_ok = false;
            }
            if *w == 0.0 {
                // Zero-weight atoms still trip the flags above but must not
                // poison the exact sums with 0 * inf.
                continue;
            }
            report.q_m += w * m;
            report.q_m_inv += w * if m > 0.0 { 1.0 / m } else { f64::INFINITY };
            report.q_ln_m += w * m.ln();
            report.q_ln_m2 += w * m2.ln();
            report.q_ln_inv_surv_mass += w * -(1.0 - q0).max(0.0).ln();
        }
        if !report.q_m_inv.is_finite() || !report.q_ln_m.is_finite() {
            report.hyp1_ok = false;
        }
        if !report.q_ln_inv_surv_mass.is_finite() {
            report.cond_1q0_ok = false;
        }
        Ok(report)
    }
}

/// Exact moments of the disorder distribution together with flags for the
/// standing integrability assumptions.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AssumptionReport {
    /// `Q[ln m]`: sign decides survival vs extinction of the lower bound.
    pub q_ln_m: f64,
    /// `Q[m]`: annealed mean offspring.
    pub q_m: f64,
    /// `Q[1/m]`.
    pub q_m_inv: f64,
    /// `Q[ln m2]` where `m2` is the per-law second moment.
    pub q_ln_m2: f64,
    /// `Q[ln(1 / (1 - q(0)))]`.
    pub q_ln_inv_surv_mass: f64,
    /// `m + 1/m` integrable: every atom has `m > 0`.
    pub hyp1_ok: bool,
    /// Every atom keeps survival mass: `q(0) < 1`.
    pub cond_1q0_ok: bool,
    /// Second moments positive and finite.
    pub k2_ok: bool,
}

/// One realization of the environment: a pure map `(t, x) -> OffspringLaw`.
///
/// `law_at` derives a uniform from the absorption chain over
/// `(master_seed, replica_id, t + time_shift, x + space_shift)` and selects
/// an atom by inverse cdf over the family weights. Immutability makes the
/// field safe to share across threads.
#[derive(Clone, Debug)]
pub struct EnvironmentField {
    atoms: Vec<OffspringLaw>,
    cumulative: Vec<f64>,
    base: SeedChain,
    replica_id: u64,
    time_shift: u32,
    space_shift: Vec<i64>,
}

impl EnvironmentField {
    pub fn new(spec: &DisorderSpec, replica_id: u64) -> Result<Self> {
        let atoms = spec.atoms()?;
        let mut cumulative = Vec::with_capacity(atoms.len());
        let mut acc = 0.0;
        for (w, _) in &atoms {
            acc += w;
            cumulative.push(acc);
        }
        if (acc - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidSpec(format!(
                "family weights sum to {acc}, expected 1"
            )));
        }
        Ok(EnvironmentField {
            atoms: atoms.into_iter().map(|(_, law)| law).collect(),
            cumulative,
            base: SeedChain::new(spec.master_seed)
                .push(STREAM_ENV)
                .push(replica_id),
            replica_id,
            time_shift: 0,
            space_shift: Vec::new(),
        })
    }

    pub fn replica_id(&self) -> u64 {
        self.replica_id
    }

    /// Atom index drawn at `(t, x)`. Exposed for independence diagnostics.
    pub fn atom_index_at(&self, t: u32, x: &[i64]) -> usize {
        let mut chain = self.base.push(u64::from(t) + u64::from(self.time_shift));
        if self.space_shift.is_empty() {
            chain = chain.push_coords(x);
        } else {
            debug_assert_eq!(self.space_shift.len(), x.len());
            for (xi, si) in x.iter().zip(&self.space_shift) {
                chain = chain.push_i64(xi + si);
            }
        }
        let u = chain.unit();
        self.cumulative.partition_point(|&c| c <= u).min(self.atoms.len() - 1)
    }

    /// Offspring law governing the site departed from at time `t`.
    pub fn law_at(&self, t: u32, x: &[i64]) -> &OffspringLaw {
        &self.atoms[self.atom_index_at(t, x)]
    }

    /// View of the same realization with indices offset by `(dt, dx)`:
    /// `shifted.law_at(t, x) = self.law_at(t + dt, x + dx)`. This is the
    /// space-time shift that relates a sub-run started at `(dt, dx)` to the
    /// ambient environment.
    pub fn shifted(&self, dt: u32, dx: &[i64]) -> Self {
        let space_shift = if self.space_shift.is_empty() {
            dx.to_vec()
        } else {
            debug_assert_eq!(self.space_shift.len(), dx.len());
            self.space_shift
                .iter()
                .zip(dx)
                .map(|(a, b)| a + b)
                .collect()
        };
        EnvironmentField {
            atoms: self.atoms.clone(),
            cumulative: self.cumulative.clone(),
            base: self.base,
            replica_id: self.replica_id,
            time_shift: self.time_shift + dt,
            space_shift,
        }
    }

    /// Materializes the laws on a finite slab, keyed by `(t, x)`. Used by
    /// purity and independence tests; simulation paths never need it.
    pub fn slab(&self, t_range: std::ops::Range<u32>, sites: &[Vec<i64>]) -> BTreeMap<(u32, Vec<i64>), usize> {
        let mut out = BTreeMap::new();
        for t in t_range {
            for x in sites {
                out.insert((t, x.clone()), self.atom_index_at(t, x));
            }
        }
        out
    }
}
