//! Property tests for the public invariants: randomized inputs, structural
//! assertions. Exact frozen-value checks live in the unit tests next to
//! each module; the acceptance suite holds the end-to-end criteria.

use proptest::prelude::*;

use brwre::brw::{step, PopulationState};
use brwre::env::{DisorderFamily, DisorderSpec, EnvironmentField, OffspringLaw};
use brwre::genfun::{extinction_field, phi_step, qhat, FieldOnWindow};
use brwre::lattice::{rate_function, rate_objective, Direction, WalkKernel};
use brwre::numeric::{log_sum_exp, multinomial_split, SeedChain};
use brwre::polymer::PartitionField;

/// Random offspring pmf with strictly positive mean and support <= 5.
fn pmf_strategy() -> impl Strategy<Value = Vec<f64>> {
    (proptest::collection::vec(0.01f64..1.0, 2..=5)).prop_map(|mut raw| {
        // Guarantee mass above zero offspring so the mean is positive.
        let last = raw.len() - 1;
        raw[last] = raw[last].max(0.05);
        let total: f64 = raw.iter().sum();
        raw.iter().map(|w| w / total).collect()
    })
}

fn two_point_spec_strategy() -> impl Strategy<Value = DisorderSpec> {
    (pmf_strategy(), pmf_strategy(), 0.05f64..0.95, any::<u64>()).prop_map(
        |(law_a, law_b, weight_a, seed)| {
            DisorderSpec::new(
                DisorderFamily::TwoPoint {
                    law_a,
                    law_b,
                    weight_a,
                },
                seed,
            )
        },
    )
}

/// Direction with denominators <= 4 in d = 1 or 2, scaled inside the
/// simplex.
fn direction_strategy() -> impl Strategy<Value = Direction> {
    (1usize..=2, proptest::collection::vec((-4i64..=4, 1i64..=4), 2))
        .prop_map(|(d, raw)| {
            let mut coords: Vec<(i64, i64)> = raw.into_iter().take(d).collect();
            // Scale down until the l1 norm is at most one.
            loop {
                let norm: f64 = coords
                    .iter()
                    .map(|(n, q)| (n.abs() as f64) / *q as f64)
                    .sum();
                if norm <= 1.0 {
                    break;
                }
                for (n, _) in coords.iter_mut() {
                    *n -= n.signum();
                }
            }
            let text = coords
                .iter()
                .map(|(n, q)| format!("{n}/{q}"))
                .collect::<Vec<_>>()
                .join(",");
            Direction::parse(&text).expect("constructed direction is valid")
        })
}

proptest! {
    #[test]
    fn offspring_law_moment_and_generating_invariants(pmf in pmf_strategy(), s in 0.0f64..=1.0) {
        let law = OffspringLaw::new(pmf).unwrap();
        // Jensen: m^2 <= m^(2).
        prop_assert!(law.mean().powi(2) <= law.second_moment() + 1e-12);
        prop_assert!((law.generating(1.0) - 1.0).abs() < 1e-9);
        let g = law.generating(s);
        prop_assert!((law.q0() - 1e-12..=1.0 + 1e-12).contains(&g));
        // Monotone in s.
        let h = law.generating((s + 0.1).min(1.0));
        prop_assert!(h >= g - 1e-12);
        prop_assert!(qhat(&law, s).unwrap() == g);
    }

    #[test]
    fn unit_inverse_sampling_respects_cdf(pmf in pmf_strategy(), u in 0.0f64..1.0) {
        let law = OffspringLaw::new(pmf.clone()).unwrap();
        let k = law.sample_from_unit(u) as usize;
        let below: f64 = pmf[..k].iter().sum();
        let upto: f64 = pmf[..=k].iter().sum();
        prop_assert!(below <= u + 1e-12 && u <= upto + 1e-12);
    }

    #[test]
    fn multinomial_split_conserves_count(
        n in 0u64..5000,
        weights in proptest::collection::vec(0.0f64..1.0, 1..=6),
        seed in any::<u64>(),
    ) {
        prop_assume!(weights.iter().sum::<f64>() > 0.0);
        let mut rng = SeedChain::new(seed).rng();
        let counts = multinomial_split(&mut rng, n, &weights);
        prop_assert_eq!(counts.len(), weights.len());
        prop_assert_eq!(counts.iter().sum::<u64>(), n);
        for (c, w) in counts.iter().zip(&weights) {
            if *w == 0.0 {
                prop_assert_eq!(*c, 0);
            }
        }
    }

    #[test]
    fn seed_chain_is_order_sensitive(a in any::<u64>(), b in any::<u64>(), master in any::<u64>()) {
        prop_assume!(a != b);
        let ab = SeedChain::new(master).push(a).push(b).state();
        let ba = SeedChain::new(master).push(b).push(a).state();
        prop_assert_ne!(ab, ba);
        let unit = SeedChain::new(master).push(a).unit();
        prop_assert!((0.0..1.0).contains(&unit));
    }

    #[test]
    fn log_sum_exp_matches_naive_at_moderate_scale(
        values in proptest::collection::vec(-30.0f64..30.0, 1..=12),
    ) {
        let naive = values.iter().map(|v| v.exp()).sum::<f64>().ln();
        prop_assert!((log_sum_exp(&values) - naive).abs() < 1e-9);
    }

    #[test]
    fn admissibility_matches_lattice_and_parity_definition(dir in direction_strategy()) {
        let n = dir.period();
        prop_assert!(n >= 1);
        for t in 1..=(3 * n).min(64) {
            // t is admissible iff t*theta is a lattice point and the walk
            // parity allows reaching it: t - |t*theta|_1 even.
            let lattice_ok = dir.site_at(t).is_ok();
            let expected = if lattice_ok {
                let site = dir.site_at(t).unwrap();
                let l1: i64 = site.iter().map(|c| c.abs()).sum();
                (t as i64 - l1) % 2 == 0
            } else {
                false
            };
            prop_assert_eq!(dir.is_admissible(t), expected, "t = {}", t);
        }
    }

    #[test]
    fn rate_function_bounds_and_midpoint_convexity(dir in direction_strategy()) {
        let d = dir.dimension();
        let ln_2d = (2.0 * d as f64).ln();
        let rate = rate_function(&dir);
        prop_assert!((0.0..=ln_2d + 1e-9).contains(&rate));
        // Convexity along the segment to the origin.
        let half = {
            let text = dir
                .theta()
                .iter()
                .map(|r| format!("{}/{}", r.numer(), 2 * r.denom()))
                .collect::<Vec<_>>()
                .join(",");
            Direction::parse(&text).unwrap()
        };
        let mid = rate_function(&half);
        prop_assert!(mid <= 0.5 * rate + 1e-5, "I(theta/2) = {} vs I(theta)/2 = {}", mid, 0.5 * rate);
    }

    #[test]
    fn rate_objective_gradient_matches_finite_differences(
        theta_raw in proptest::collection::vec(-0.4f64..0.4, 1..=2),
        alpha in proptest::collection::vec(-2.0f64..2.0, 2),
    ) {
        let d = theta_raw.len();
        let alpha = &alpha[..d];
        let (_, grad) = rate_objective(&theta_raw, alpha);
        let eps = 1e-6;
        for i in 0..d {
            let mut hi = alpha.to_vec();
            hi[i] += eps;
            let mut lo = alpha.to_vec();
            lo[i] -= eps;
            let fd = (rate_objective(&theta_raw, &hi).0 - rate_objective(&theta_raw, &lo).0)
                / (2.0 * eps);
            prop_assert!((grad[i] - fd).abs() < 1e-5);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn environment_is_pure_and_shifts_compose(
        spec in two_point_spec_strategy(),
        replica in 0u64..8,
        dt in 0u32..5,
        dx in -4i64..4,
    ) {
        let env = EnvironmentField::new(&spec, replica).unwrap();
        for t in 0..4u32 {
            for x in -3i64..=3 {
                let a = env.law_at(t, &[x]).pmf().to_vec();
                let b = env.law_at(t, &[x]).pmf().to_vec();
                prop_assert_eq!(&a, &b);
                let shifted = env.shifted(dt, &[dx]);
                let c = shifted.law_at(t, &[x]).pmf().to_vec();
                let direct = env.law_at(t + dt, &[x + dx]).pmf().to_vec();
                prop_assert_eq!(&c, &direct);
            }
        }
    }

    #[test]
    fn spec_round_trips_through_serde(spec in two_point_spec_strategy()) {
        let text = serde_json::to_string(&spec).unwrap();
        let back: DisorderSpec = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(spec, back);
    }

    #[test]
    fn partition_mass_decomposes_over_sites(
        spec in two_point_spec_strategy(),
        t in 1u32..6,
    ) {
        let env = EnvironmentField::new(&spec, 0).unwrap();
        let field = PartitionField::evolved_to(&env, 1, t);
        let total: f64 = field.entries().map(|(_, ln_z)| ln_z.exp()).sum();
        prop_assert!((total.ln() - field.ln_total()).abs() < 1e-9);
        for (x, _) in field.entries() {
            let l1: i64 = x.iter().map(|c| c.abs()).sum();
            prop_assert!(l1 <= t as i64);
            prop_assert_eq!((x[0] - t as i64).rem_euclid(2), 0);
        }
    }

    #[test]
    fn population_step_respects_parity_and_reach(
        spec in two_point_spec_strategy(),
        seed in any::<u64>(),
    ) {
        let env = EnvironmentField::new(&spec, 1).unwrap();
        let mut rng = SeedChain::new(seed).rng();
        let mut pop = PopulationState::initial(2);
        for t in 1..=4u32 {
            pop = step(&pop, &env, &mut rng);
            for (x, n) in pop.sites() {
                prop_assert!(n > 0);
                let l1: i64 = x.iter().map(|c| c.abs()).sum();
                prop_assert!(l1 <= t as i64);
                prop_assert_eq!((l1 - t as i64).rem_euclid(2), 0);
            }
            if pop.is_extinct() {
                break;
            }
        }
    }

    #[test]
    fn extinction_origin_sequence_is_monotone(
        spec in two_point_spec_strategy(),
        replica in 0u64..8,
    ) {
        let env = EnvironmentField::new(&spec, replica).unwrap();
        let ext = extinction_field(&env, 1, 8, 8).unwrap();
        for w in ext.origin_sequence.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-15);
        }
        let last = *ext.origin_sequence.last().unwrap();
        prop_assert!((0.0..=1.0).contains(&last));
    }

    #[test]
    fn generating_operator_is_monotone_and_bounded(
        spec in two_point_spec_strategy(),
        base in 0.0f64..0.6,
        bump in 0.0f64..0.4,
    ) {
        let env = EnvironmentField::new(&spec, 3).unwrap();
        let lo = FieldOnWindow::from_fn(1, 5, base, |x| {
            (base + 0.05 * (x[0].rem_euclid(4)) as f64).min(1.0)
        })
        .unwrap();
        let hi = FieldOnWindow::from_fn(1, 5, (base + bump).min(1.0), |x| {
            (lo.get(x) + bump).min(1.0)
        })
        .unwrap();
        let lo_out = phi_step(&lo, &env, 0);
        let hi_out = phi_step(&hi, &env, 0);
        let kernel = WalkKernel::new(1).unwrap();
        prop_assert_eq!(kernel.degree(), 2);
        for x in -5i64..=5 {
            let a = lo_out.get(&[x]);
            let b = hi_out.get(&[x]);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(a <= b + 1e-12);
        }
    }
}
