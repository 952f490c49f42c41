//! Nearest-neighbor walk geometry on `Z^d`: admissible directions, exact
//! step-count probabilities, and the large-deviation rate of the walk.
//!
//! A space-time direction is a rational vector `theta` with `|theta|_1 <= 1`.
//! The walk can sit at `t * theta` only when `t * theta` is integral and
//! `t - t |theta|_1` is even; those horizons form an arithmetic progression
//! `n(theta) N`, and `n(theta)` is exposed as the direction's period.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, SeedChain, LOG_ZERO};

/// Lattice site. Lexicographic `Ord` on the coordinate vector is the
/// crate-wide deterministic iteration order.
pub type Site = Vec<i64>;

/// Largest horizon accepted by [`ln_walk_prob`].
pub const WALK_PROB_T_MAX: u32 = 40;
/// Horizons up to this bound use exact big-integer path counts; above it the
/// convolution runs in the log domain.
pub const WALK_PROB_EXACT_T: u32 = 20;
/// Sup-norm clamp on the tilt variable in the rate-function ascent; boundary
/// directions attain their supremum only at infinity, and `e^{-2 * 40}` is
/// far below every tolerance used here.
pub const ALPHA_CLAMP: f64 = 40.0;

const STREAM_RETURN: u64 = 0x5245_5455;
const MAX_DENOMINATOR: i64 = 1_000_000;

/// Uniform nearest-neighbor step kernel on `Z^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WalkKernel {
    d: usize,
}

impl WalkKernel {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDirection("dimension must be positive".into()));
        }
        Ok(WalkKernel { d })
    }

    pub fn dimension(&self) -> usize {
        self.d
    }

    /// Number of neighbors, `2d`.
    pub fn degree(&self) -> usize {
        2 * self.d
    }

    pub fn ln_step_prob(&self) -> f64 {
        -((2 * self.d) as f64).ln()
    }

    /// Neighbor along move index `j in 0..2d`: axis `j / 2`, sign from the
    /// parity of `j`. The fixed encoding keeps sampled jumps reproducible.
    pub fn neighbor(&self, x: &[i64], j: usize) -> Site {
        debug_assert!(j < self.degree());
        let mut y = x.to_vec();
        y[j / 2] += if j.is_multiple_of(2) { 1 } else { -1 };
        y
    }

    pub fn neighbors<'a>(&'a self, x: &'a [i64]) -> impl Iterator<Item = Site> + 'a {
        (0..self.degree()).map(move |j| self.neighbor(x, j))
    }
}

/// Rational direction in the closed unit `l1` ball.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Direction {
    theta: Vec<Ratio<i64>>,
    period: u32,
}

impl Direction {
    pub fn new(theta: Vec<Ratio<i64>>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidDirection("empty coordinate list".into()));
        }
        for c in &theta {
            if c.denom().abs() > MAX_DENOMINATOR {
                return Err(Error::InvalidDirection(format!(
                    "denominator {} too large",
                    c.denom()
                )));
            }
        }
        let l1: Ratio<i64> = theta.iter().map(|c| c.abs()).sum();
        if l1 > Ratio::from_integer(1) {
            return Err(Error::InvalidDirection(format!(
                "|theta|_1 = {l1} exceeds 1"
            )));
        }
        let period = period_of(&theta, &l1);
        Ok(Direction { theta, period })
    }

    /// Parses `"1/2,0,-1/4"`; dimension is the number of entries.
    pub fn parse(text: &str) -> Result<Self> {
        let theta = text
            .split(',')
            .map(|piece| {
                let piece = piece.trim();
                let (num, den) = match piece.split_once('/') {
                    Some((n, d)) => (n.trim(), d.trim()),
                    None => (piece, "1"),
                };
                let n: i64 = num
                    .parse()
                    .map_err(|_| Error::InvalidDirection(format!("bad numerator in {piece:?}")))?;
                let d: i64 = den
                    .parse()
                    .map_err(|_| Error::InvalidDirection(format!("bad denominator in {piece:?}")))?;
                if d == 0 {
                    return Err(Error::InvalidDirection(format!("zero denominator in {piece:?}")));
                }
                Ok(Ratio::new(n, d))
            })
            .collect::<Result<Vec<_>>>()?;
        Direction::new(theta)
    }

    pub fn zero(d: usize) -> Self {
        Direction::new(vec![Ratio::zero(); d]).expect("origin direction is valid")
    }

    /// Unit vector `e_axis`.
    pub fn axis(d: usize, axis: usize) -> Self {
        assert!(axis < d);
        let mut theta = vec![Ratio::zero(); d];
        theta[axis] = Ratio::from_integer(1);
        Direction::new(theta).expect("axis direction is valid")
    }

    pub fn dimension(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[Ratio<i64>] {
        &self.theta
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.theta
            .iter()
            .map(|c| *c.numer() as f64 / *c.denom() as f64)
            .collect()
    }

    pub fn l1_norm(&self) -> Ratio<i64> {
        self.theta.iter().map(|c| c.abs()).sum()
    }

    /// Minimal admissible horizon `n(theta)`; the full admissible set is its
    /// multiples.
    pub fn period(&self) -> u32 {
        self.period
    }

    pub fn is_admissible(&self, t: u32) -> bool {
        t > 0 && t.is_multiple_of(self.period)
    }

    fn require_admissible(&self, t: u32) -> Result<()> {
        if self.is_admissible(t) {
            Ok(())
        } else {
            Err(Error::InadmissibleHorizon {
                t,
                direction: self.to_string(),
                period: self.period,
            })
        }
    }

    /// Exact lattice point `t * theta`; requires `t = 0` or `t` admissible.
    pub fn site_at(&self, t: u32) -> Result<Site> {
        if t != 0 {
            self.require_admissible(t)?;
        }
        Ok(self
            .theta
            .iter()
            .map(|c| {
                let scaled = c * Ratio::from_integer(t as i64);
                debug_assert!(scaled.is_integer());
                scaled.to_integer()
            })
            .collect())
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.theta.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            if c.is_integer() {
                write!(f, "{}", c.numer())?;
            } else {
                write!(f, "{}/{}", c.numer(), c.denom())?;
            }
        }
        Ok(())
    }
}

/// `n(theta)`: smallest `t >= 1` with `t * theta` integral and
/// `t(1 - |theta|_1)` an even integer. With `L` the lcm of the coordinate
/// denominators, `t` must be a multiple of `L` and the parity constraint
/// either holds for all such multiples or exactly the even ones, so the
/// answer is `L` or `2L`.
fn period_of(theta: &[Ratio<i64>], l1: &Ratio<i64>) -> u32 {
    let l = theta
        .iter()
        .fold(1i64, |acc, c| acc.lcm(c.denom()));
    let l_times_l1 = (l1 * Ratio::from_integer(l)).to_integer();
    if (l - l_times_l1) % 2 == 0 {
        l as u32
    } else {
        2 * l as u32
    }
}

/// `ln P(S_t = t * theta)` for the uniform nearest-neighbor walk, by exact
/// convolution over the reachable cone. Horizons up to [`WALK_PROB_EXACT_T`]
/// count paths in big integers; up to [`WALK_PROB_T_MAX`] the same dynamic
/// program runs on log-weights.
pub fn ln_walk_prob(dir: &Direction, t: u32) -> Result<f64> {
    dir.require_admissible(t)?;
    if t > WALK_PROB_T_MAX {
        return Err(Error::LimitExceeded {
            what: "exact walk probability horizon",
            limit: WALK_PROB_T_MAX as u64,
            requested: t as u64,
        });
    }
    let kernel = WalkKernel::new(dir.dimension())?;
    let target = dir.site_at(t)?;
    let ln_2d = ((2 * dir.dimension()) as f64).ln();

    if t <= WALK_PROB_EXACT_T {
        let mut counts: BTreeMap<Site, BigUint> = BTreeMap::new();
        counts.insert(vec![0; dir.dimension()], BigUint::from(1u32));
        for _ in 0..t {
            let mut next: BTreeMap<Site, BigUint> = BTreeMap::new();
            for (x, c) in counts {
                for y in kernel.neighbors(&x) {
                    *next.entry(y).or_insert_with(BigUint::zero) += &c;
                }
            }
            counts = next;
        }
        match counts.get(&target) {
            Some(c) if !c.is_zero() => {
                let ln_count = c.to_f64().expect("count fits in f64 range").ln();
                Ok(ln_count - t as f64 * ln_2d)
            }
            _ => Ok(LOG_ZERO),
        }
    } else {
        let mut lp: BTreeMap<Site, f64> = BTreeMap::new();
        lp.insert(vec![0; dir.dimension()], 0.0);
        for _ in 0..t {
            let mut incoming: BTreeMap<Site, Vec<f64>> = BTreeMap::new();
            for (x, v) in &lp {
                for y in kernel.neighbors(x) {
                    incoming.entry(y).or_default().push(v - ln_2d);
                }
            }
            lp = incoming
                .into_iter()
                .map(|(y, vs)| (y, log_sum_exp(&vs)))
                .collect();
        }
        Ok(lp.get(&target).copied().unwrap_or(LOG_ZERO))
    }
}

/// Concave tilted objective `alpha . theta - ln((1/d) sum_i cosh alpha_i)`
/// and its gradient. The supremum over `alpha` is the rate `I(theta)`.
pub fn rate_objective(theta: &[f64], alpha: &[f64]) -> (f64, Vec<f64>) {
    debug_assert_eq!(theta.len(), alpha.len());
    let d = theta.len() as f64;
    let m: f64 = alpha.iter().map(|a| a.cosh()).sum();
    let value = alpha
        .iter()
        .zip(theta)
        .map(|(a, th)| a * th)
        .sum::<f64>()
        - (m / d).ln();
    let grad = theta
        .iter()
        .zip(alpha)
        .map(|(th, a)| th - a.sinh() / m)
        .collect();
    (value, grad)
}

/// Solves the small dense system `h s = b` by partial-pivot elimination.
fn solve_dense(mut h: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| h[i][col].abs().partial_cmp(&h[j][col].abs()).unwrap())?;
        if h[pivot_row][col].abs() < 1e-300 {
            return None;
        }
        h.swap(col, pivot_row);
        b.swap(col, pivot_row);
        let (pivot, rest) = h.split_at_mut(col + 1);
        for (row, hrow) in rest.iter_mut().enumerate() {
            let f = hrow[col] / pivot[col][col];
            for (hk, pk) in hrow[col..].iter_mut().zip(&pivot[col][col..]) {
                *hk -= f * pk;
            }
            b[col + 1 + row] -= f * b[col];
        }
    }
    let mut s = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= h[row][k] * s[k];
        }
        s[row] = acc / h[row][row];
    }
    Some(s)
}

/// Large-deviation rate `I(theta) = sup_alpha { alpha . theta - ln M(alpha) }`
/// of the nearest-neighbor walk, by damped Newton ascent with the tilt
/// clamped to `|alpha_i| <= ALPHA_CLAMP`.
///
/// `I(0) = 0`, `I(e_i) = ln 2d`, and `0 <= I <= ln 2d` throughout; the
/// result is clamped to that interval to absorb rounding at the endpoints.
pub fn rate_function(dir: &Direction) -> f64 {
    let theta = dir.as_f64();
    let d = theta.len();
    let ln_2d = (2.0 * d as f64).ln();
    let mut alpha = vec![0.0; d];
    let mut value = rate_objective(&theta, &alpha).0;

    for _ in 0..500 {
        let (_, grad) = rate_objective(&theta, &alpha);
        let gnorm = grad.iter().fold(0.0f64, |acc, g| acc.max(g.abs()));
        if gnorm < 1e-13 {
            break;
        }
        // Hessian of ln M: diag(cosh_i / M) - (sinh/M)(sinh/M)^T.
        let m: f64 = alpha.iter().map(|a| a.cosh()).sum();
        let u: Vec<f64> = alpha.iter().map(|a| a.sinh() / m).collect();
        let mut h = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..d {
                h[i][j] = if i == j { alpha[i].cosh() / m } else { 0.0 } - u[i] * u[j];
            }
        }
        let mut step = solve_dense(h, grad.clone()).unwrap_or_else(|| grad.clone());
        // Keep an ascent direction.
        let slope: f64 = step.iter().zip(&grad).map(|(s, g)| s * g).sum();
        if slope <= 0.0 {
            step = grad.clone();
        }
        let slope: f64 = step.iter().zip(&grad).map(|(s, g)| s * g).sum();

        let mut lambda = 1.0;
        let mut advanced = false;
        for _ in 0..60 {
            let cand: Vec<f64> = alpha
                .iter()
                .zip(&step)
                .map(|(a, s)| (a + lambda * s).clamp(-ALPHA_CLAMP, ALPHA_CLAMP))
                .collect();
            if cand == alpha {
                break;
            }
            let cand_value = rate_objective(&theta, &cand).0;
            if cand_value >= value + 1e-4 * lambda * slope || cand_value > value {
                alpha = cand;
                value = cand_value;
                advanced = true;
                break;
            }
            lambda *= 0.5;
        }
        if !advanced {
            break;
        }
    }
    value.clamp(0.0, ln_2d)
}

/// Monte Carlo return probability of the walk, used as the transience
/// threshold in disorder classification.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct ReturnProbability {
    pub estimate: f64,
    pub std_err: f64,
    /// True when the value is the known recurrence constant (`d <= 2`)
    /// rather than an estimate.
    pub analytic: bool,
    /// Local-CLT estimate of the first-return mass beyond `t_max`; the
    /// estimator is biased low by at most about this much.
    pub truncation_bias_bound: f64,
    pub walkers: u64,
    pub t_max: u32,
}

/// Probability that the walk ever returns to the origin. Recurrent
/// dimensions (`d <= 2`) report exactly 1; transient ones are estimated by
/// `walkers` independent walks truncated at `t_max` steps.
pub fn return_probability(d: usize, t_max: u32, walkers: u64, seed: u64) -> Result<ReturnProbability> {
    if d == 0 {
        return Err(Error::InvalidDirection("dimension must be positive".into()));
    }
    if d <= 2 {
        return Ok(ReturnProbability {
            estimate: 1.0,
            std_err: 0.0,
            analytic: true,
            truncation_bias_bound: 0.0,
            walkers: 0,
            t_max,
        });
    }
    if walkers < 2 {
        return Err(Error::InsufficientData {
            what: "return probability walkers",
            need: 2,
            got: walkers as usize,
        });
    }
    let returned: u64 = (0..walkers)
        .into_par_iter()
        .map(|i| {
            let mut rng = SeedChain::new(seed).push(STREAM_RETURN).push(i).rng();
            let mut pos = vec![0i64; d];
            for _ in 0..t_max {
                let mv = rng.gen_range(0..2 * d);
                pos[mv / 2] += if mv % 2 == 0 { 1 } else { -1 };
                if pos.iter().all(|&c| c == 0) {
                    return 1u64;
                }
            }
            0u64
        })
        .sum();
    let p = returned as f64 / walkers as f64;
    let half_d = d as f64 / 2.0;
    // Union bound over even times > t_max with the local CLT density
    // P(S_{2n} = 0) ~ 2 (d / 4 pi n)^{d/2}, integrated in n.
    let bias = 2.0 * (d as f64 / (4.0 * std::f64::consts::PI)).powf(half_d)
        * (t_max as f64 / 2.0).powf(1.0 - half_d)
        / (half_d - 1.0);
    Ok(ReturnProbability {
        estimate: p,
        std_err: (p * (1.0 - p) / walkers as f64).sqrt(),
        analytic: false,
        truncation_bias_bound: bias,
        walkers,
        t_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dir(text: &str) -> Direction {
        Direction::parse(text).unwrap()
    }

    #[test]
    fn parse_canonicalizes_fractions() {
        let a = dir("2/4,0");
        let b = dir("1/2,0");
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "1/2,0");
        assert_eq!(dir("-2/4").theta()[0], Ratio::new(-1, 2));
    }

    #[test]
    fn parse_rejects_malformed_and_oversized() {
        assert!(Direction::parse("").is_err());
        assert!(Direction::parse("1/0").is_err());
        assert!(Direction::parse("x,1").is_err());
        assert!(Direction::parse("3/4,1/2").is_err()); // |theta|_1 = 5/4
        assert!(Direction::parse("1,1").is_err());
    }

    #[test]
    fn periods_match_bruteforce_minimum() {
        // Oracle: scan t = 1.. for integrality of t * theta and evenness of
        // t - t |theta|_1, entirely in exact arithmetic.
        let brute = |d: &Direction| -> u32 {
            let one = Ratio::from_integer(1);
            for t in 1i64..=5000 {
                let tr = Ratio::from_integer(t);
                let integral = d.theta().iter().all(|c| (c * tr).is_integer());
                let slack = (one - d.l1_norm()) * tr;
                if integral && slack.is_integer() && slack.to_integer() % 2 == 0 {
                    return t as u32;
                }
            }
            panic!("no admissible horizon found");
        };
        for text in [
            "0", "1", "-1", "1/2", "-1/3", "2/5", "1/6", "0,0", "1/2,1/2", "1/2,-1/4", "1/3,1/3",
            "0,1", "1/5,2/5", "0,0,0", "1/2,1/4,1/4", "1/3,0,-1/3",
        ] {
            let d = dir(text);
            assert_eq!(d.period(), brute(&d), "period mismatch for {text}");
        }
        assert_eq!(dir("0").period(), 2);
        assert_eq!(dir("1").period(), 1);
        assert_eq!(dir("1/2").period(), 4);
    }

    #[test]
    fn admissible_set_is_exactly_the_multiples() {
        // The period computation asserts the admissible set is an arithmetic
        // progression; check every t up to 60 against the defining predicate.
        let one = Ratio::from_integer(1);
        for text in ["0", "1/2", "1/3", "1/2,1/2", "1/2,-1/4"] {
            let d = dir(text);
            for t in 1i64..=60 {
                let tr = Ratio::from_integer(t);
                let integral = d.theta().iter().all(|c| (c * tr).is_integer());
                let slack = (one - d.l1_norm()) * tr;
                let admissible =
                    integral && slack.is_integer() && slack.to_integer() % 2 == 0;
                assert_eq!(
                    d.is_admissible(t as u32),
                    admissible,
                    "direction {text}, t = {t}"
                );
            }
        }
    }

    #[test]
    fn site_at_is_exact() {
        // L = 4 but 4 - 4 |theta|_1 = 1 is odd, so the period doubles to 8.
        let d = dir("1/2,-1/4");
        assert_eq!(d.period(), 8);
        assert_eq!(d.site_at(8).unwrap(), vec![4, -2]);
        assert!(d.site_at(6).is_err());
        assert!(d.site_at(4).is_err());
        assert_eq!(d.site_at(0).unwrap(), vec![0, 0]);
    }

    #[test]
    fn walk_prob_frozen_values() {
        // d = 1, t = 2 at origin: 2 of 4 paths return.
        let p = ln_walk_prob(&dir("0"), 2).unwrap();
        assert!((p - 0.5f64.ln()).abs() < 1e-12);
        // d = 1, t = 3 at x = 3: a single forced path of probability 1/8.
        let p = ln_walk_prob(&dir("1"), 3).unwrap();
        assert!((p - 0.125f64.ln()).abs() < 1e-12);
        // d = 2, t = 2 at (1, 1): 2 of 16 paths.
        let p = ln_walk_prob(&dir("1/2,1/2"), 2).unwrap();
        assert!((p - 0.125f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn walk_prob_matches_path_enumeration() {
        // Oracle: enumerate all (2d)^t paths directly.
        let enumerate = |d: usize, t: u32, target: &[i64]| -> f64 {
            let kernel = WalkKernel::new(d).unwrap();
            let moves = kernel.degree();
            let mut hits = 0u64;
            for code in 0..(moves as u64).pow(t) {
                let mut c = code;
                let mut pos = vec![0i64; d];
                for _ in 0..t {
                    let j = (c % moves as u64) as usize;
                    c /= moves as u64;
                    pos = kernel.neighbor(&pos, j);
                }
                if pos == target {
                    hits += 1;
                }
            }
            (hits as f64).ln() - t as f64 * (moves as f64).ln()
        };
        for (text, t) in [("0", 4), ("0", 6), ("1/2", 4), ("1/3", 6), ("1", 5)] {
            let d = dir(text);
            let expect = enumerate(1, t, &d.site_at(t).unwrap());
            let got = ln_walk_prob(&d, t).unwrap();
            assert!((got - expect).abs() < 1e-12, "{text} at t = {t}");
        }
        for (text, t) in [("0,0", 4), ("1/2,1/2", 4), ("1/2,-1/2", 2), ("1/4,1/4", 4)] {
            let d = dir(text);
            let expect = enumerate(2, t, &d.site_at(t).unwrap());
            let got = ln_walk_prob(&d, t).unwrap();
            assert!((got - expect).abs() < 1e-12, "{text} at t = {t}");
        }
    }

    #[test]
    fn walk_prob_log_domain_route_agrees_with_exact_route() {
        // t = 24 > WALK_PROB_EXACT_T exercises the log-domain branch; compare
        // with the closed binomial form C(24, 12) / 2^24.
        let p = ln_walk_prob(&dir("0"), 24).unwrap();
        let mut ln_c = 0.0f64;
        for k in 0..12u32 {
            ln_c += ((24 - k) as f64).ln() - ((k + 1) as f64).ln();
        }
        let expect = ln_c - 24.0 * 2f64.ln();
        assert!((p - expect).abs() < 1e-10);
    }

    #[test]
    fn walk_prob_respects_signed_permutation_symmetry() {
        let base = ln_walk_prob(&dir("1/2,1/4"), 8).unwrap();
        for text in ["1/4,1/2", "-1/2,1/4", "1/2,-1/4", "-1/4,-1/2"] {
            let p = ln_walk_prob(&dir(text), 8).unwrap();
            assert!((p - base).abs() < 1e-12, "symmetry broken for {text}");
        }
    }

    #[test]
    fn rate_function_known_values() {
        assert_eq!(rate_function(&Direction::zero(1)), 0.0);
        assert_eq!(rate_function(&Direction::zero(3)), 0.0);
        assert!((rate_function(&dir("1")) - 2f64.ln()).abs() < 1e-6);
        assert!((rate_function(&dir("1,0")) - 4f64.ln()).abs() < 1e-6);
        assert!((rate_function(&dir("0,1,0")) - 6f64.ln()).abs() < 1e-6);
        // Boundary diagonal in d = 2: forced +e1/+e2 paths give ln 2.
        assert!((rate_function(&dir("1/2,1/2")) - 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn rate_function_interior_value_solves_tilt_equation() {
        // theta = (1/2, 0): optimum at alpha = (ln 3, 0) where
        // 2 sinh a = cosh a + 1; value = (ln 3)/2 - ln(4/3).
        let expect = 0.5 * 3f64.ln() - (4.0f64 / 3.0).ln();
        let got = rate_function(&dir("1/2,0"));
        assert!((got - expect).abs() < 1e-9, "got {got}, expect {expect}");
    }

    #[test]
    fn rate_bounds_hold_on_a_direction_sweep() {
        for text in ["0", "1/4", "2/3", "1", "1/3,1/3", "1/2,-1/4", "0,0,1/5"] {
            let d = dir(text);
            let rate = rate_function(&d);
            let ln_2d = (2.0 * d.dimension() as f64).ln();
            assert!((0.0..=ln_2d).contains(&rate), "{text} -> {rate}");
        }
    }

    #[test]
    fn walk_prob_lower_bounds_converge_to_rate() {
        // Each admissible horizon gives -(1/t) ln P >= I(theta), and doubling
        // the horizon never worsens the bound (superadditivity of ln P).
        for text in ["0", "1/2", "1/3"] {
            let d = dir(text);
            let rate = rate_function(&d);
            let n = d.period();
            let mut horizons = vec![n, 2 * n, 4 * n];
            horizons.retain(|&t| t <= 12);
            for &t in &horizons {
                let per_step = ln_walk_prob(&d, t).unwrap() / t as f64;
                assert!(
                    -per_step >= rate - 1e-9,
                    "{text}: bound {} below rate {rate}",
                    -per_step
                );
            }
            // Doubling comparison, the form guaranteed by superadditivity.
            let a = ln_walk_prob(&d, n).unwrap() / n as f64;
            let b = ln_walk_prob(&d, 2 * n).unwrap() / (2 * n) as f64;
            assert!(b >= a - 1e-12, "{text}: per-step log-prob fell from {a} to {b}");
        }
    }

    #[test]
    fn rate_gradient_matches_finite_differences() {
        let mut rng = SeedChain::new(31).rng();
        for _ in 0..100 {
            let d = 1 + (rng.gen_range(0..3) as usize);
            let theta: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.3..0.3)).collect();
            let alpha: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (_, grad) = rate_objective(&theta, &alpha);
            for i in 0..d {
                let h = 1e-5;
                let mut hi = alpha.clone();
                hi[i] += h;
                let mut lo = alpha.clone();
                lo[i] -= h;
                let fd = (rate_objective(&theta, &hi).0 - rate_objective(&theta, &lo).0) / (2.0 * h);
                assert!(
                    (fd - grad[i]).abs() < 1e-6,
                    "coordinate {i}: fd {fd} vs grad {}",
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn rate_is_convex_along_segments() {
        // 11 points on two segments; discrete second differences stay
        // nonnegative up to rounding.
        let segments = [
            (vec![Ratio::new(-1, 2)], vec![Ratio::new(1, 2)]),
            (
                vec![Ratio::new(0, 1), Ratio::new(0, 1)],
                vec![Ratio::new(1, 2), Ratio::new(1, 2)],
            ),
        ];
        for (a, b) in segments {
            let vals: Vec<f64> = (0..=10)
                .map(|k| {
                    let lam = Ratio::new(k, 10);
                    let theta: Vec<Ratio<i64>> = a
                        .iter()
                        .zip(&b)
                        .map(|(ai, bi)| ai * (Ratio::from_integer(1) - lam) + bi * lam)
                        .collect();
                    rate_function(&Direction::new(theta).unwrap())
                })
                .collect();
            for w in vals.windows(3) {
                assert!(
                    w[0] - 2.0 * w[1] + w[2] >= -1e-8,
                    "convexity violated: {w:?}"
                );
            }
        }
    }

    #[test]
    fn return_probability_analytic_below_three_dimensions() {
        let r = return_probability(1, 10, 10, 0).unwrap();
        assert_eq!(r.estimate, 1.0);
        assert!(r.analytic);
        let r = return_probability(2, 10, 10, 0).unwrap();
        assert_eq!(r.estimate, 1.0);
    }

    #[test]
    fn return_probability_three_dimensions_near_known_constant() {
        // Polya's constant for d = 3 is 0.3405...; truncation biases the
        // estimate low by at most the reported bound.
        let r = return_probability(3, 2000, 20_000, 7).unwrap();
        assert!(!r.analytic);
        let lo = 0.3405 - r.truncation_bias_bound - 4.0 * r.std_err;
        let hi = 0.3405 + 4.0 * r.std_err;
        assert!(
            (lo..=hi).contains(&r.estimate),
            "estimate {} outside [{lo}, {hi}]",
            r.estimate
        );
    }
}
