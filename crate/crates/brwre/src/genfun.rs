//! Generating functions of the branching walk and the bounds they yield.
//!
//! For a single particle departing `(t, x)` the number of descendants
//! placed anywhere is governed by the site law `q_{t,x}`; killing every
//! particle independently encodes survival through generating functions.
//! The one-step operator on spatial fields `xi : Z^d -> [0, 1]` is
//!
//! ```text
//! (Phi_t xi)(x) = (1/2d) sum_{y ~ x} qhat_{t,x}(xi(y)),
//! ```
//!
//! the probability that a particle departing `(t, x)` leaves no descendant
//! line surviving the killing profile `xi` one step later. Composing the
//! operators of successive times and evaluating at the zero field gives the
//! quenched extinction probability by time `t`:
//!
//! ```text
//! delta_t = (Phi_0 . Phi_1 . ... . Phi_{t-1})(0),    delta_t at the origin
//! ```
//!
//! nondecreasing in `t` with limit the extinction probability. Two
//! homogeneous comparisons sandwich the survival probability: a single-type
//! process with the annealed (weight-averaged) law from above, and a
//! time-i.i.d. single-site chain from below.
//!
//! Fields live on a finite l1 window. One operator application reads
//! nearest neighbors, so after `k` applications the values at `|x|_1 <=
//! radius - k` are exact (untouched by the boundary fill); all consumers
//! here restrict themselves to that interior.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::brw::{step, PopulationState};
use crate::env::{DisorderSpec, EnvironmentField, OffspringLaw};
use crate::error::{Error, Result};
use crate::lattice::{Site, WalkKernel};
use crate::numeric::SeedChain;
use crate::stats::EstimateWithCI;

/// Increment below which the extinction sequence is declared converged.
pub const CONVERGENCE_TOL: f64 = 1e-12;

const STREAM_GF: u64 = 0x4746_4944;
const STREAM_SW: u64 = 0x5357_4c42;

/// Checked evaluation of the offspring generating function
/// `qhat(s) = sum_k q(k) s^k` on its domain `[0, 1]`.
pub fn qhat(law: &OffspringLaw, s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::OutOfRange {
            name: "generating function argument",
            value: s,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(law.generating(s))
}

/// All lattice sites with `|x|_1 <= radius`, lexicographically ordered.
fn l1_ball(d: usize, radius: u32) -> Vec<Site> {
    fn rec(d: usize, radius: i64, prefix: &mut Site, out: &mut Vec<Site>) {
        if d == 0 {
            out.push(prefix.clone());
            return;
        }
        for x in -radius..=radius {
            prefix.push(x);
            rec(d - 1, radius - x.abs(), prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, i64::from(radius), &mut Vec::with_capacity(d), &mut out);
    out
}

/// A `[0, 1]`-valued field on the l1 ball of a given radius, extended by a
/// constant boundary value outside.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldOnWindow {
    d: usize,
    radius: u32,
    boundary: f64,
    values: BTreeMap<Site, f64>,
}

impl FieldOnWindow {
    pub fn constant(d: usize, radius: u32, value: f64) -> Result<Self> {
        Self::from_fn(d, radius, value, |_| value)
    }

    /// Builds a field from per-site values; everything must land in `[0, 1]`.
    pub fn from_fn<F: Fn(&[i64]) -> f64>(
        d: usize,
        radius: u32,
        boundary: f64,
        f: F,
    ) -> Result<Self> {
        for (name, v) in [("field boundary value", boundary)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange {
                    name,
                    value: v,
                    lo: 0.0,
                    hi: 1.0,
                });
            }
        }
        let mut values = BTreeMap::new();
        for x in l1_ball(d, radius) {
            let v = f(&x);
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange {
                    name: "field value",
                    value: v,
                    lo: 0.0,
                    hi: 1.0,
                });
            }
            values.insert(x, v);
        }
        Ok(FieldOnWindow {
            d,
            radius,
            boundary,
            values,
        })
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    /// Field value, falling back to the boundary constant outside the window.
    pub fn get(&self, x: &[i64]) -> f64 {
        self.values
            .get(x)
            .copied()
            .unwrap_or(self.boundary)
    }

    pub fn origin(&self) -> f64 {
        self.get(&vec![0; self.d])
    }

    /// Largest absolute deviation from `other` over `|x|_1 <= interior`.
    pub fn interior_distance(&self, other: &FieldOnWindow, interior: u32) -> f64 {
        l1_ball(self.d, interior)
            .iter()
            .map(|x| (self.get(x) - other.get(x)).abs())
            .fold(0.0, f64::max)
    }
}

/// One application of the time-`t` generating operator. Values at
/// `|x|_1 = radius` read the boundary constant of `xi`; see the module
/// notes for the interior-exactness contract.
pub fn phi_step(xi: &FieldOnWindow, env: &EnvironmentField, t: u32) -> FieldOnWindow {
    let kernel = WalkKernel::new(xi.d).expect("field dimension is positive");
    let inv_degree = 1.0 / kernel.degree() as f64;
    let values: BTreeMap<Site, f64> = xi
        .values
        .keys()
        .map(|x| {
            let law = env.law_at(t, x);
            let mean: f64 = kernel
                .neighbors(x)
                .map(|y| law.generating(xi.get(&y)))
                .sum::<f64>()
                * inv_degree;
            debug_assert!((-1e-9..=1.0 + 1e-9).contains(&mean));
            (x.clone(), mean.clamp(0.0, 1.0))
        })
        .collect();
    FieldOnWindow {
        d: xi.d,
        radius: xi.radius,
        boundary: xi.boundary,
        values,
    }
}

/// Quenched extinction probabilities by increasing horizon.
#[derive(Clone, Debug)]
pub struct ExtinctionField {
    /// The horizon-`t_max` field `x -> P^q(B survives to t_max from one
    /// particle at (0, x) ... dies)`, exact on `|x|_1 <= radius - t_max`.
    pub field: FieldOnWindow,
    /// `origin_sequence[t] = delta_t` at the origin, `t = 0..=t_max`;
    /// nondecreasing with limit the quenched extinction probability.
    pub origin_sequence: Vec<f64>,
    /// Last increment of the origin sequence.
    pub final_increment: f64,
    /// Whether the last increment fell below [`CONVERGENCE_TOL`].
    pub converged: bool,
}

/// Computes `delta_t` for all `t <= t_max` by backward composition.
///
/// Each horizon is recomposed from scratch because the operator product
/// grows on the left (`delta_{t+1} = Phi_0(delta_t of the time-shifted
/// environment)`), so successive horizons share no suffix in the same
/// environment. The window must satisfy `radius >= t_max` so the origin
/// value stays exact.
pub fn extinction_field(
    env: &EnvironmentField,
    d: usize,
    t_max: u32,
    radius: u32,
) -> Result<ExtinctionField> {
    if radius < t_max {
        return Err(Error::WindowTooSmall {
            radius: i64::from(radius),
            t_max,
            required: i64::from(t_max),
        });
    }
    let mut origin_sequence = Vec::with_capacity(t_max as usize + 1);
    origin_sequence.push(0.0);
    let mut last_field = FieldOnWindow::constant(d, radius, 0.0)?;
    for t in 1..=t_max {
        let mut xi = FieldOnWindow::constant(d, radius, 0.0)?;
        for u in (0..t).rev() {
            xi = phi_step(&xi, env, u);
        }
        origin_sequence.push(xi.origin());
        last_field = xi;
    }
    let final_increment = if t_max == 0 {
        0.0
    } else {
        origin_sequence[t_max as usize] - origin_sequence[t_max as usize - 1]
    };
    Ok(ExtinctionField {
        field: last_field,
        origin_sequence,
        final_increment,
        converged: final_increment.abs() < CONVERGENCE_TOL,
    })
}

/// Monte Carlo check of the product identity
/// `P^q[ prod_x xi(x)^{B_t(x)} ] = (Phi_0 ... Phi_{t-1} xi)(0)`.
#[derive(Clone, Debug, Serialize)]
pub struct GfIdentityCheck {
    pub mc_mean: f64,
    pub mc_std_err: f64,
    pub composed: f64,
    /// Normalized discrepancy `(mc_mean - composed) / mc_std_err`.
    pub z: f64,
    pub replicas: u64,
}

pub fn gf_identity_check(
    spec: &DisorderSpec,
    env_replica: u64,
    xi: &FieldOnWindow,
    t: u32,
    replicas: u64,
) -> Result<GfIdentityCheck> {
    if xi.radius() < t {
        return Err(Error::WindowTooSmall {
            radius: i64::from(xi.radius()),
            t_max: t,
            required: i64::from(t),
        });
    }
    let d = xi.dimension();
    let env = EnvironmentField::new(spec, env_replica)?;
    let samples: Vec<f64> = (0..replicas)
        .into_par_iter()
        .map(|p| {
            let mut rng = SeedChain::new(spec.master_seed)
                .push(STREAM_GF)
                .push(env_replica)
                .push(p)
                .rng();
            let mut pop = PopulationState::initial(d);
            for _ in 0..t {
                pop = step(&pop, &env, &mut rng);
            }
            pop.sites()
                .map(|(x, n)| xi.get(x).powi(n as i32))
                .product::<f64>()
        })
        .collect();
    let est = EstimateWithCI::from_samples(&samples)?;
    let mut composed = xi.clone();
    for u in (0..t).rev() {
        composed = phi_step(&composed, &env, u);
    }
    let composed = composed.origin();
    let z = if est.std_err > 0.0 {
        (est.mean - composed) / est.std_err
    } else if (est.mean - composed).abs() < 1e-12 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(GfIdentityCheck {
        mc_mean: est.mean,
        mc_std_err: est.std_err,
        composed,
        z,
        replicas,
    })
}

/// Survival upper bound from the annealed single-type comparison process.
#[derive(Clone, Debug, Serialize)]
pub struct GwBound {
    /// Survival probability of the homogeneous process with the
    /// weight-averaged offspring law; an upper bound for the walk.
    pub sigma: f64,
    pub extinction: f64,
    pub iterations: u32,
    pub converged: bool,
    pub annealed_pmf: Vec<f64>,
}

pub fn gw_bound(spec: &DisorderSpec, t_max: u32) -> Result<GwBound> {
    let atoms = spec.atoms()?;
    let len = atoms
        .iter()
        .map(|(_, law)| law.pmf().len())
        .max()
        .unwrap_or(1);
    let mut pmf = vec![0.0; len];
    for (w, law) in &atoms {
        for (k, &p) in law.pmf().iter().enumerate() {
            pmf[k] += w * p;
        }
    }
    let annealed = OffspringLaw::new(pmf.clone())?;
    let mut s = 0.0;
    let mut increment = 1.0;
    for _ in 0..t_max {
        let next = annealed.generating(s);
        increment = next - s;
        s = next;
    }
    Ok(GwBound {
        sigma: 1.0 - s,
        extinction: s,
        iterations: t_max,
        converged: increment.abs() < CONVERGENCE_TOL,
        annealed_pmf: pmf,
    })
}

/// Survival lower bound from the time-i.i.d. single-site chain.
#[derive(Clone, Debug, Serialize)]
pub struct SwBound {
    /// `1 - E[delta_t]` at each checkpoint, nonincreasing in `t`.
    pub sigma_by_t: Vec<(u32, EstimateWithCI)>,
    /// The value at the final checkpoint `t_max`.
    pub sigma: EstimateWithCI,
    pub replicas: u64,
}

/// Estimates the survival probability of the single-site chain whose
/// generation laws are drawn i.i.d. from the disorder.
///
/// The quenched extinction by time `t` composes the generating functions of
/// the first `t` laws with the latest law innermost:
/// `delta_t = qhat_{u_0}(qhat_{u_1}(... qhat_{u_{t-1}}(0)))`. Each replica
/// draws one law sequence and evaluates that composition at every
/// checkpoint over the shared prefix, so the recorded ladder is pathwise
/// nondecreasing in `t`. Checkpoints are the powers of two up to `t_max`
/// plus `t_max` itself, keeping the total fold work linear in `t_max`.
pub fn sw_bound(spec: &DisorderSpec, t_max: u32, replicas: u64) -> Result<SwBound> {
    if t_max == 0 || replicas == 0 {
        return Err(Error::InsufficientData {
            what: "single-site chain horizon and replicas",
            need: 1,
            got: 0,
        });
    }
    let atoms = spec.atoms()?;
    let mut cumulative = Vec::with_capacity(atoms.len());
    let mut acc = 0.0;
    for (w, _) in &atoms {
        acc += w;
        cumulative.push(acc);
    }
    let mut checkpoints: Vec<u32> = (0..)
        .map(|k| 1u32 << k)
        .take_while(|&t| t < t_max)
        .collect();
    checkpoints.push(t_max);
    let per_replica: Vec<Vec<f64>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let chain = SeedChain::new(spec.master_seed).push(STREAM_SW).push(r);
            let laws: Vec<usize> = (0..t_max)
                .map(|t| {
                    let u = chain.push(u64::from(t)).unit();
                    cumulative.partition_point(|&c| c < u).min(atoms.len() - 1)
                })
                .collect();
            checkpoints
                .iter()
                .map(|&t| {
                    laws[..t as usize]
                        .iter()
                        .rev()
                        .fold(0.0, |s, &idx| atoms[idx].1.generating(s))
                })
                .collect()
        })
        .collect();
    let mut sigma_by_t = Vec::with_capacity(checkpoints.len());
    for (i, &t) in checkpoints.iter().enumerate() {
        let survival: Vec<f64> = per_replica.iter().map(|v| 1.0 - v[i]).collect();
        sigma_by_t.push((t, EstimateWithCI::from_samples(&survival)?));
    }
    let sigma = sigma_by_t.last().expect("at least one checkpoint").1;
    Ok(SwBound {
        sigma_by_t,
        sigma,
        replicas,
    })
}

/// Diagnostics for the one-step recursion of the extinction field.
#[derive(Clone, Debug, Serialize)]
pub struct FixedPointResidual {
    /// `sup |Phi_0(delta_{t})(shifted) - delta_t|` over the safe interior:
    /// how far the horizon-`t_max` field still is from stationarity.
    pub residual: f64,
    /// The same gap at the origin alone, `delta_{t_max+1} - delta_{t_max}`.
    pub origin_gap: f64,
    /// `sup |delta_{t_max+1} - Phi_0(shifted delta_{t_max})|`: the exact
    /// cocycle identity, zero up to rounding for a correct implementation.
    pub identity_gap: f64,
    /// Radius of the interior over which the suprema were taken.
    pub interior_radius: u32,
    pub t_max: u32,
}

/// Checks `delta_{t+1} = Phi_0(delta_t of the time-shifted environment)`
/// and measures the distance of the horizon-`t_max` field from the fixed
/// point. Needs `radius >= t_max + 1` so the compared fields share an exact
/// interior.
pub fn fixed_point_residual(
    env: &EnvironmentField,
    d: usize,
    t_max: u32,
    radius: u32,
) -> Result<FixedPointResidual> {
    if radius < t_max + 1 {
        return Err(Error::WindowTooSmall {
            radius: i64::from(radius),
            t_max,
            required: i64::from(t_max) + 1,
        });
    }
    let interior = radius - t_max - 1;
    let current = extinction_field(env, d, t_max, radius)?.field;
    let shifted_env = env.shifted(1, &vec![0; d]);
    let shifted = extinction_field(&shifted_env, d, t_max, radius)?.field;
    let advanced = phi_step(&shifted, env, 0);
    let longer = extinction_field(env, d, t_max + 1, radius)?.field;
    let identity_gap = longer.interior_distance(&advanced, interior);
    let residual = advanced.interior_distance(&current, interior);
    let origin_gap = advanced.origin() - current.origin();
    Ok(FixedPointResidual {
        residual,
        origin_gap,
        identity_gap,
        interior_radius: interior,
        t_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::DisorderFamily;

    fn binary_spec() -> DisorderSpec {
        DisorderSpec::new(
            DisorderFamily::Deterministic {
                pmf: vec![0.25, 0.0, 0.75],
            },
            0,
        )
    }

    fn mixture_spec() -> DisorderSpec {
        DisorderSpec::new(
            DisorderFamily::TwoPoint {
                law_a: vec![0.5, 0.0, 0.5],
                law_b: vec![0.25, 0.0, 0.75],
                weight_a: 0.5,
            },
            0,
        )
    }

    #[test]
    fn qhat_domain_and_fixed_point() {
        let law = OffspringLaw::new(vec![0.25, 0.0, 0.75]).unwrap();
        assert!((qhat(&law, 1.0 / 3.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((qhat(&law, 0.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((qhat(&law, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(qhat(&law, -0.1).is_err());
        assert!(qhat(&law, 1.1).is_err());
    }

    #[test]
    fn window_enumerates_l1_ball() {
        let f = FieldOnWindow::constant(1, 2, 0.5).unwrap();
        assert_eq!(f.values.len(), 5);
        let f = FieldOnWindow::constant(2, 2, 0.5).unwrap();
        assert_eq!(f.values.len(), 13);
        assert_eq!(f.get(&[1, 1]), 0.5);
        // Outside the window the boundary constant answers.
        let g = FieldOnWindow::from_fn(2, 2, 0.25, |_| 0.75).unwrap();
        assert_eq!(g.get(&[2, 1]), 0.25);
        assert!(FieldOnWindow::constant(1, 2, 1.2).is_err());
        assert!(FieldOnWindow::from_fn(1, 2, 0.5, |x| x[0] as f64).is_err());
    }

    #[test]
    fn operator_on_constant_field_is_pointwise_generating_value() {
        let env = EnvironmentField::new(&binary_spec(), 0).unwrap();
        let xi = FieldOnWindow::constant(2, 4, 0.5).unwrap();
        let out = phi_step(&xi, &env, 3);
        // Constant law and constant field: qhat(1/2) = 1/4 + 3/4 * 1/4.
        let expect = 0.25 + 0.75 * 0.25;
        for x in l1_ball(2, 4) {
            assert!((out.get(&x) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn operator_is_monotone_in_the_field() {
        let env = EnvironmentField::new(&mixture_spec(), 3).unwrap();
        let lo = FieldOnWindow::from_fn(1, 6, 0.3, |x| {
            0.3 + 0.2 * ((x[0].rem_euclid(3)) as f64 / 3.0)
        })
        .unwrap();
        let hi = FieldOnWindow::from_fn(1, 6, 0.5, |x| {
            (lo.get(x) + 0.2 + 0.1 * ((x[0].rem_euclid(2)) as f64)).min(1.0)
        })
        .unwrap();
        let lo_out = phi_step(&lo, &env, 0);
        let hi_out = phi_step(&hi, &env, 0);
        for x in l1_ball(1, 6) {
            assert!(lo_out.get(&x) <= hi_out.get(&x) + 1e-15);
        }
    }

    #[test]
    fn homogeneous_environment_reduces_to_scalar_iteration() {
        // Constant law: the origin sequence is the plain iterate of qhat at
        // zero, and it converges to the extinction probability 1/3.
        let env = EnvironmentField::new(&binary_spec(), 0).unwrap();
        let ext = extinction_field(&env, 1, 40, 40).unwrap();
        let law = OffspringLaw::new(vec![0.25, 0.0, 0.75]).unwrap();
        let mut s = 0.0;
        for t in 0..=40usize {
            assert!(
                (ext.origin_sequence[t] - s).abs() < 1e-12,
                "t = {t}: {} vs {s}",
                ext.origin_sequence[t]
            );
            s = law.generating(s);
        }
        assert!((ext.origin_sequence[40] - 1.0 / 3.0).abs() < 1e-9);
        assert!(ext.converged);
    }

    #[test]
    fn origin_sequence_is_nondecreasing_in_random_environment() {
        let env = EnvironmentField::new(&mixture_spec(), 7).unwrap();
        let ext = extinction_field(&env, 1, 24, 24).unwrap();
        for w in ext.origin_sequence.windows(2) {
            assert!(w[1] >= w[0] - 1e-15, "sequence dipped: {w:?}");
        }
        assert!(ext.origin_sequence[24] > 0.0 && ext.origin_sequence[24] < 1.0);
    }

    #[test]
    fn window_radius_is_enforced_and_interior_is_exact() {
        let env = EnvironmentField::new(&mixture_spec(), 11).unwrap();
        assert!(matches!(
            extinction_field(&env, 1, 10, 9),
            Err(Error::WindowTooSmall { .. })
        ));
        let small = extinction_field(&env, 1, 10, 12).unwrap();
        let large = extinction_field(&env, 1, 10, 20).unwrap();
        for t in 0..=10usize {
            assert!(
                (small.origin_sequence[t] - large.origin_sequence[t]).abs() < 1e-12
            );
        }
        // The smaller window is exact on |x| <= 2; compare there.
        assert!(small.field.interior_distance(&large.field, 2) < 1e-12);
    }

    #[test]
    fn identity_check_near_zero_z_and_enforces_window() {
        let spec = mixture_spec();
        let xi = FieldOnWindow::constant(1, 4, 0.5).unwrap();
        let check = gf_identity_check(&spec, 2, &xi, 3, 20_000).unwrap();
        assert!(
            check.z.abs() <= 4.0,
            "z = {} (mc {} vs composed {})",
            check.z,
            check.mc_mean,
            check.composed
        );
        assert!(check.composed > 0.0 && check.composed < 1.0);
        assert!(matches!(
            gf_identity_check(&spec, 2, &xi, 5, 10),
            Err(Error::WindowTooSmall { .. })
        ));
    }

    #[test]
    fn annealed_bound_values() {
        // Mixture averages to {0 -> 3/8, 2 -> 5/8}: extinction solves
        // s = 3/8 + 5/8 s^2, root 3/5, survival 2/5.
        let gw = gw_bound(&mixture_spec(), 200).unwrap();
        assert!((gw.sigma - 0.4).abs() < 1e-9, "sigma {}", gw.sigma);
        assert!(gw.converged);
        assert!((gw.annealed_pmf[0] - 0.375).abs() < 1e-15);
        // Constant binary law: survival 2/3.
        let gw = gw_bound(&binary_spec(), 200).unwrap();
        assert!((gw.sigma - 2.0 / 3.0).abs() < 1e-9);
        // Subcritical law dies out.
        let sub = DisorderSpec::new(
            DisorderFamily::Deterministic {
                pmf: vec![0.6, 0.0, 0.4],
            },
            0,
        );
        let gw = gw_bound(&sub, 400).unwrap();
        assert!(gw.sigma.abs() < 1e-6);
    }

    #[test]
    fn single_atom_chain_equals_annealed_bound_exactly() {
        // With one atom every replica composes the same generating
        // function, so the chain bound collapses to the scalar iterate.
        let sw = sw_bound(&binary_spec(), 64, 200).unwrap();
        let gw = gw_bound(&binary_spec(), 64).unwrap();
        assert!((sw.sigma.mean - gw.sigma).abs() < 1e-12);
        assert!(sw.sigma.std_err < 1e-12);
    }

    #[test]
    fn chain_bound_ladder_is_nonincreasing_and_below_annealed() {
        let sw = sw_bound(&mixture_spec(), 128, 4000).unwrap();
        for pair in sw.sigma_by_t.windows(2) {
            assert!(
                pair[1].1.mean <= pair[0].1.mean + 1e-12,
                "ladder rose: {} then {}",
                pair[0].1.mean,
                pair[1].1.mean
            );
        }
        let gw = gw_bound(&mixture_spec(), 200).unwrap();
        assert!(
            sw.sigma.mean <= gw.sigma + 3.0 * sw.sigma.std_err,
            "chain bound {} above annealed bound {}",
            sw.sigma.mean,
            gw.sigma
        );
        assert!(sw.sigma.mean > 0.0);
    }

    #[test]
    fn recursion_identity_holds_and_constant_env_is_stationary() {
        let env = EnvironmentField::new(&mixture_spec(), 5).unwrap();
        let res = fixed_point_residual(&env, 1, 12, 16).unwrap();
        assert!(res.identity_gap < 1e-12, "identity gap {}", res.identity_gap);
        assert!(res.origin_gap >= -1e-15);
        assert!(res.origin_gap <= res.residual + 1e-15);
        // Constant supercritical law converges geometrically; by t = 40 the
        // field is stationary to rounding.
        let env = EnvironmentField::new(&binary_spec(), 0).unwrap();
        let res = fixed_point_residual(&env, 1, 40, 42).unwrap();
        assert!(res.residual < 1e-12, "residual {}", res.residual);
        assert!(matches!(
            fixed_point_residual(&env, 1, 12, 12),
            Err(Error::WindowTooSmall { .. })
        ));
    }
}
