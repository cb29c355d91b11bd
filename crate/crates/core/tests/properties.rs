use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use proptest::prelude::*;

use hcwand_core::bipartite::{
    s_shape_certificate, solve_bip_q2, solve_bip_q4_i4, w_map, InvariantSet,
};
use hcwand_core::exact::{descartes_sign_count, eta_poly, theta1_poly, theta_product};
use hcwand_core::solver::{find_two_cycle, MapFamily, ScalarMap, ShiftedPowerMap, ROOT_TOLERANCE};
use hcwand_core::ti::{enumerate_ti_q4, lambda_cr1, lambda_of_t};
use hcwand_core::treesim::{step, TruncatedLaw};
use hcwand_core::wand::{
    implied_activities, ActivityProfile, PeriodicBoundaryLaw, ReducedSystem, SystemKind,
};

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

/// Direct evaluation of the translation-invariant right-hand side at `spin`
/// for a law given on all of ℤ.
fn direct_update(k: u32, lambda: f64, z: &dyn Fn(i64) -> f64, spin: i64) -> f64 {
    let num = if spin.rem_euclid(2) == 1 {
        z(spin - 1) + z(spin) + z(spin + 1)
    } else {
        z(spin - 1) + z(spin + 1)
    };
    lambda * (num / (z(-1) + z(1))).powi(k as i32)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn folding_matches_unreduced_equations(
        k in 2u32..=5,
        q4 in any::<bool>(),
        acts in prop::collection::vec(log_uniform(0.05, 20.0), 3),
        z in prop::collection::vec(log_uniform(0.05, 20.0), 3),
    ) {
        let q = if q4 { 4 } else { 2 };
        let mut lambdas = vec![1.0];
        lambdas.extend_from_slice(&acts[..q - 1]);
        let profile = ActivityProfile::new(lambdas.clone()).unwrap();
        let sys = ReducedSystem::build(k, q, profile, SystemKind::TranslationInvariant).unwrap();
        let unknowns = &z[..q - 1];
        let image = sys.image(unknowns).unwrap();
        let mut full = vec![1.0];
        full.extend_from_slice(unknowns);
        let law = |s: i64| full[s.rem_euclid(q as i64) as usize];
        for spin in 1..q as i64 {
            // evaluate at a shifted copy of the residue class as well
            for shift in [0, 3 * q as i64, -5 * q as i64] {
                let want = direct_update(k, lambdas[spin as usize], &law, spin + shift);
                let got = image[spin as usize - 1];
                prop_assert!((got - want).abs() <= 1e-12 * want);
            }
        }
    }

    #[test]
    fn activities_are_determined_by_the_law(
        k in 2u32..=5,
        z in prop::collection::vec(log_uniform(0.05, 20.0), 3),
    ) {
        let law = PeriodicBoundaryLaw::new(vec![1.0, z[0], z[1], z[2]]).unwrap();
        let acts = implied_activities(k, &law).unwrap();
        let sys = ReducedSystem::build(k, 4, acts.clone(), SystemKind::TranslationInvariant).unwrap();
        prop_assert!(sys.max_residual(law.unknowns()).unwrap() < 1e-9 * z.iter().cloned().fold(1.0, f64::max));
        // any other profile moves some component by a nonzero factor
        let mut other = acts.values().to_vec();
        other[2] *= 1.01;
        let sys2 = ReducedSystem::build(k, 4, ActivityProfile::new(other).unwrap(), SystemKind::TranslationInvariant).unwrap();
        prop_assert!(sys2.max_residual(law.unknowns()).unwrap() > 1e-6 * z[1]);
    }

    #[test]
    fn ti_q4_swap_symmetry(
        k in 2u32..=5,
        l2 in log_uniform(0.1, 10.0),
        factor in 1.01f64..5.0,
    ) {
        let lambda = factor * lambda_cr1(k, l2);
        let set = enumerate_ti_q4(k, lambda, l2).unwrap();
        prop_assert_eq!(set.count(), 3);
        let sys = ReducedSystem::build(k, 4, ActivityProfile::q4(lambda, l2).unwrap(), SystemKind::TranslationInvariant).unwrap();
        for s in &set.solutions {
            let eps = sys.max_residual(&[s.first, l2, s.second]).unwrap();
            let swapped = sys.max_residual(&[s.second, l2, s.first]).unwrap();
            prop_assert!(eps < 1e-10);
            prop_assert!(swapped < 1e-10);
        }
    }

    #[test]
    fn w_preserves_invariant_sets(
        k in 2u32..=6,
        lambda in log_uniform(0.01, 100.0),
        gamma in log_uniform(0.1, 10.0),
        raw in prop::collection::vec(log_uniform(0.01, 100.0), 4),
    ) {
        let raw = [raw[0], raw[1], raw[2], raw[3]];
        for set in InvariantSet::ALL {
            let x = set.project(raw);
            prop_assert!(set.contains(x, 0.0));
            prop_assert!(set.contains(w_map(k, lambda, gamma, x), 1e-12));
        }
    }

    #[test]
    fn derivatives_match_central_differences(
        k in 2u32..=6,
        lambda in log_uniform(0.01, 100.0),
        shift in 1.05f64..4.0,
        x in log_uniform(1e-3, 1e3),
    ) {
        let map = ShiftedPowerMap::new(k, lambda, shift).unwrap();
        let h = 1e-6 * x;
        let fd = (map.eval(x + h) - map.eval(x - h)) / (2.0 * h);
        let an = map.derivative(x);
        prop_assert!((fd - an).abs() <= 1e-6 * an.abs());
        let fd2 = (map.second_iterate(x + h) - map.second_iterate(x - h)) / (2.0 * h);
        let an2 = map.second_iterate_derivative(x);
        // the second iterate is nearly flat far from x0, so allow cancellation error
        let floor = 1e-8 * map.second_iterate(x) / x;
        prop_assert!((fd2 - an2).abs() <= 1e-6 * an2.abs() + floor);
        prop_assert!(an2 > 0.0);
    }

    #[test]
    fn invariant_bracket_maps_into_itself(
        k in 2u32..=6,
        lambda in log_uniform(1e-3, 1e3),
        shift in 1.05f64..4.0,
        u in 0.0f64..=1.0,
    ) {
        let map = ShiftedPowerMap::new(k, lambda, shift).unwrap();
        let b = map.invariant_bracket();
        let x = b.lo * (b.hi / b.lo).powf(u);
        let y = map.eval(x);
        prop_assert!(b.lo <= y && y <= b.hi);
    }

    #[test]
    fn two_cycles_swap_and_straddle(
        k in 2u32..=5,
        lambda in log_uniform(1e-2, 1e3),
        shift in 1.05f64..4.0,
    ) {
        let map = ShiftedPowerMap::new(k, lambda, shift).unwrap();
        let x0 = map.fixed_point().unwrap().x0;
        if let Some(c) = find_two_cycle(&map, x0, map.invariant_bracket(), ROOT_TOLERANCE).unwrap() {
            prop_assert!(c.x1 < x0 && x0 < c.x2);
            prop_assert!((map.eval(c.x1) - c.x2).abs() <= 1e-10 * c.x2.max(1.0));
            prop_assert!((map.eval(c.x2) - c.x1).abs() <= 1e-10 * c.x2.max(1.0));
            prop_assert!(map.derivative(x0) < -1.0);
        } else {
            prop_assert!(map.derivative(x0) >= -1.0 - 1e-9);
        }
    }

    #[test]
    fn threshold_and_derivative_agree(k in 2u32..=8, gamma in log_uniform(0.1, 10.0)) {
        for (map_at, cr) in [
            (Box::new(move |l: f64| ShiftedPowerMap::period_two(k, l).unwrap()) as Box<dyn Fn(f64) -> ShiftedPowerMap>,
             hcwand_core::bipartite::lambda_cr2(k)),
            (Box::new(move |l: f64| ShiftedPowerMap::period_four(k, l, gamma).unwrap()),
             hcwand_core::bipartite::lambda_cr3(k, gamma)),
        ] {
            let below = map_at(cr * (1.0 - 1e-6));
            let above = map_at(cr * (1.0 + 1e-6));
            let d = |m: &ShiftedPowerMap| m.derivative(m.fixed_point().unwrap().x0) + 1.0;
            prop_assert!(d(&below) < 0.0);
            prop_assert!(d(&above) > 0.0);
        }
    }

    #[test]
    fn bipartite_solutions_solve_the_level_system(
        k in 2u32..=5,
        gamma in log_uniform(0.2, 5.0),
        factor in log_uniform(0.05, 3.0),
    ) {
        let lambda = factor * hcwand_core::bipartite::lambda_cr2(k);
        let q2 = ReducedSystem::build(k, 2, ActivityProfile::q2(lambda).unwrap(), SystemKind::Bipartite).unwrap();
        for s in solve_bip_q2(k, lambda).unwrap().solutions {
            prop_assert!(q2.max_residual(&[s.first, s.second]).unwrap() < 1e-10 * s.first.max(s.second).max(1.0));
        }
        let q4 = ReducedSystem::build(k, 4, ActivityProfile::q4(lambda, gamma).unwrap(), SystemKind::Bipartite).unwrap();
        for s in solve_bip_q4_i4(k, lambda, gamma).unwrap().solutions {
            let z = [s.first, gamma, s.first, s.second, gamma, s.second];
            prop_assert!(q4.max_residual(&z).unwrap() < 1e-10 * s.first.max(s.second).max(1.0));
        }
    }

    #[test]
    fn curve_is_symmetric_and_rising(
        k in 2u32..=8,
        l2 in log_uniform(0.1, 10.0),
        t in log_uniform(1.001, 1e3),
    ) {
        let a = lambda_of_t(t, k, l2);
        let b = lambda_of_t(1.0 / t, k, l2);
        prop_assert!((a - b).abs() <= 1e-12 * a);
        prop_assert!(lambda_of_t(t * 1.01, k, l2) > a);
        prop_assert!(a > lambda_of_t(1.0, k, l2));
    }

    #[test]
    fn s_shape_certificates_hold(k in 2u32..=6, lambda in log_uniform(0.05, 50.0), gamma in log_uniform(0.2, 5.0)) {
        let f = s_shape_certificate(MapFamily::F, k, lambda, None, 300).unwrap();
        prop_assert!(f.is_valid(), "{:?}", f);
        let g = s_shape_certificate(MapFamily::G, k, lambda, Some(gamma), 300).unwrap();
        prop_assert!(g.is_valid(), "{:?}", g);
    }

    #[test]
    fn tree_step_keeps_exact_diagonal(k in 2u32..=4, lambda in log_uniform(0.1, 10.0), l2 in log_uniform(0.2, 5.0)) {
        let a = hcwand_core::ti::solve_ti_q4_diagonal(k, lambda, l2).unwrap();
        let law = PeriodicBoundaryLaw::q4(a, l2, a).unwrap();
        let child = TruncatedLaw::from_periodic(20, &law).unwrap();
        let out = step(&vec![child; k as usize], k, &ActivityProfile::q4(lambda, l2).unwrap(), 1e300).unwrap();
        prop_assert!(out.law.deviation(&law, 18) < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn product_form_matches_expansion(k in 2u32..=12, n in 1i64..2_000_000, d in 1i64..1_000_000) {
        let t = BigRational::new(BigInt::from(n), BigInt::from(d));
        let x = &t - BigRational::one();
        let poly = theta1_poly(k).unwrap();
        prop_assert_eq!(poly.eval(&x), theta_product(k, &t).unwrap());
        // the quartic factor is positive on both sides of t = 1
        prop_assert!(eta_poly(k).unwrap().eval(&x).is_positive());
        if t != BigRational::one() {
            prop_assert!(poly.eval(&x).is_positive());
        }
    }

    #[test]
    fn descartes_count_is_one(k in 2u32..=12, n in 1i64..1_000_000, d in 1i64..1_000_000) {
        let lambda = BigRational::new(BigInt::from(n), BigInt::from(d));
        prop_assert_eq!(descartes_sign_count(k, &lambda).unwrap(), 1);
    }
}

#[test]
fn theta_vanishes_to_fourth_order() {
    for k in 2..=12u32 {
        let p = theta1_poly(k).unwrap();
        let zero = BigRational::from_integer(0.into());
        assert_eq!(p.eval(&zero), zero);
        let mut d = p.clone();
        for _ in 0..4 {
            d = d.derivative();
        }
        let kk = BigInt::from(k);
        let want = &kk * &kk * (&kk - 1) * (BigInt::from(2) * &kk * &kk - &kk + 3) / 6;
        assert_eq!(d.eval(&zero), BigRational::from_integer(want * 24));
    }
}

#[test]
fn off_diagonal_pair_merges_at_threshold() {
    for k in 2..=5 {
        let l2 = 0.8;
        let cr = lambda_cr1(k, l2);
        let mut last = f64::INFINITY;
        for j in 1..=6 {
            let set = enumerate_ti_q4(k, cr * (1.0 + 10f64.powi(-j)), l2).unwrap();
            let off = set.off_diagonal().unwrap();
            let gap = (off.first - off.second).abs();
            assert!(gap < last);
            last = gap;
        }
        assert!(last < 1e-2);
    }
}
