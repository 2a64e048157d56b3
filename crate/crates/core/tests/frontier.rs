mod common;

use negotiate_core::domain::{Contract, Role, Term};
use negotiate_core::exec::Parallelism;
use negotiate_core::frontier::{brute_force_naive, brute_force_oracle, compute_frontier, efficiency_distances, UtilityPoint};
use negotiate_core::utility::{normalized_utility, sample_profile};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pair(seed: u64) -> (negotiate_core::utility::UtilityProfile, negotiate_core::utility::UtilityProfile) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = sample_profile(Role::Buyer, &mut rng);
    let s = sample_profile(Role::Seller, &mut rng);
    (b, s)
}

#[test]
fn price_only_nbs_is_analytic() {
    let (b, s) = (common::price_only(Role::Buyer), common::price_only(Role::Seller));
    let curve = compute_frontier(&b, &s).unwrap();
    let (gp, gb, gs) = common::price_only_nbs_by_grid(200_000);
    assert!((gp - 35.0).abs() < 1e-3);
    assert!((curve.nbs.contract.price() - 35.0).abs() < 1e-6, "{}", curve.nbs.contract.price());
    assert!((curve.nbs.point.buyer - 0.4).abs() < 1e-6);
    assert!((curve.nbs.point.seller - 1.0 / 3.0).abs() < 1e-6);
    assert!((curve.nbs.point.buyer - gb).abs() < 1e-4 && (curve.nbs.point.seller - gs).abs() < 1e-4);
}

#[test]
fn price_only_deal_distances() {
    let (b, s) = (common::price_only(Role::Buyer), common::price_only(Role::Seller));
    let curve = compute_frontier(&b, &s).unwrap();
    let mut deal = curve.nbs.contract;
    deal.continuous[Term::Price.index()] = 40.0;
    let e = efficiency_distances(&curve, &deal, &b, &s).unwrap();
    assert!((e.deal_point.buyer - 0.2).abs() < 1e-12 && (e.deal_point.seller - 0.5).abs() < 1e-12);
    let want = ((0.2f64 - 0.4).powi(2) + (0.5f64 - 1.0 / 3.0).powi(2)).sqrt();
    assert!((e.d_nbs - want).abs() < 1e-9);
    assert!(e.d_pareto < 1e-9, "price-only deals all lie on the frontier");

    let e = efficiency_distances(&curve, &curve.nbs.contract, &b, &s).unwrap();
    assert!(e.d_nbs < 1e-12 && e.d_pareto < 1e-12);
}

#[test]
fn dominated_deal_has_positive_pareto_distance() {
    let (b, s) = common::pair_fixture();
    let curve = compute_frontier(&b, &s).unwrap();
    // worst option everywhere for both is strictly inside
    let c = Contract { continuous: [35.0, 20.0, 20.0, 7.0], choices: [2, 4, 2, 0, 0], accessories: false };
    let e = efficiency_distances(&curve, &c, &b, &s).unwrap();
    assert!(e.d_pareto > 0.0);
}

#[test]
fn solver_matches_hand_enumeration() {
    for seed in 0..6 {
        let (b, s) = pair(seed);
        let curve = compute_frontier(&b, &s).unwrap();
        let (front, nbs) = common::hand_grid_frontier(&b, &s, 4);
        for (x, y) in &front {
            let d = curve.distance_to(&UtilityPoint::new(*x, *y));
            assert!(d < 0.05, "seed {seed}: grid point ({x}, {y}) {d} from frontier");
        }
        assert!(curve.nbs.product >= nbs - 1e-9, "seed {seed}: {} < {}", curve.nbs.product, nbs);
        let lib = brute_force_naive(&b, &s, 4, Parallelism::Sequential).unwrap();
        let lib_best = lib.frontier.iter().filter(|p| p.buyer >= 0.0 && p.seller >= 0.0).map(|p| p.product()).fold(0.0, f64::max);
        assert!((lib_best - nbs).abs() < 1e-9, "library grid oracle disagrees with hand enumeration");
    }
}

#[test]
fn decomposed_oracle_equals_naive_enumeration() {
    for seed in 10..13 {
        let (b, s) = pair(seed);
        let fast = brute_force_oracle(&b, &s, 4, Parallelism::Parallel).unwrap();
        let naive = brute_force_naive(&b, &s, 4, Parallelism::Sequential).unwrap();
        assert_eq!(fast.contracts_evaluated, naive.contracts_evaluated);
        assert_eq!(fast.frontier.len(), naive.frontier.len());
        for (p, q) in fast.frontier.iter().zip(&naive.frontier) {
            assert!(p.distance(q) < 1e-12);
        }
    }
}

#[test]
fn parallel_and_sequential_oracles_agree() {
    let (b, s) = pair(77);
    let a = brute_force_oracle(&b, &s, 6, Parallelism::Parallel).unwrap();
    let c = brute_force_oracle(&b, &s, 6, Parallelism::Sequential).unwrap();
    assert_eq!(a, c);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn frontier_is_monotone_and_nbs_is_feasible(seed in any::<u64>()) {
        let (b, s) = pair(seed);
        let curve = compute_frontier(&b, &s).unwrap();
        for w in curve.vertices.windows(2) {
            prop_assert!(w[0].point.buyer <= w[1].point.buyer + 1e-12);
            prop_assert!(w[0].point.seller > w[1].point.seller - 1e-12);
        }
        for v in &curve.vertices {
            prop_assert!(v.contract.within_joint_bounds());
            let ub = normalized_utility(&b, &v.contract).unwrap();
            let us = normalized_utility(&s, &v.contract).unwrap();
            prop_assert!((ub - v.point.buyer).abs() < 1e-9 && (us - v.point.seller).abs() < 1e-9);
        }
        let n = &curve.nbs;
        prop_assert!(n.contract.within_joint_bounds());
        let ub = normalized_utility(&b, &n.contract).unwrap();
        let us = normalized_utility(&s, &n.contract).unwrap();
        prop_assert!((ub - n.point.buyer).abs() < 1e-9 && (us - n.point.seller).abs() < 1e-9);
        prop_assert!((n.product - ub * us).abs() < 1e-9);
        for v in &curve.vertices {
            prop_assert!(v.point.buyer.max(0.0) * v.point.seller.max(0.0) <= n.product + 1e-9);
        }
    }
}
