mod common;

use negotiate_core::beliefs::{
    alignment_score, extract_beliefs, keyword_beliefs, signed_accuracy_at_k, top_k_components, Belief, BeliefSource,
    ExtractorBackend,
};
use negotiate_core::condition::Condition;
use negotiate_core::domain::{Component, Contract, FeatureVector, Role, Term, TermValue, DIM};
use negotiate_core::metrics::{
    anchor_report, categorical_conflict_report, concession, condition_summary, coupling_report, fit, own_gain, Stat,
};
use negotiate_core::protocol::{NoDealReason, Outcome};
use negotiate_core::record::TrialRecord;
use negotiate_core::runner::run_trial;
use negotiate_core::utility::{sample_profile, UtilityProfile};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PRICE: Component = Component { term: Term::Price, option: None };
const DELIVERY: Component = Component { term: Term::Delivery, option: None };

fn fv(pairs: &[(usize, f64)]) -> FeatureVector {
    let mut f = FeatureVector::zeros();
    for (i, v) in pairs {
        f.0[*i] = *v;
    }
    f
}

fn belief(feature: Component, direction: i8) -> Belief {
    Belief { feature, direction, turn_index: 1, source: BeliefSource::Annotation }
}

#[test]
fn concession_hand_cases() {
    let prev = fv(&[(0, 0.5), (1, 0.5)]);
    assert!((concession(&[(PRICE, -1)], &prev, &fv(&[(0, 0.4), (1, 0.5)])) - 0.1).abs() < 1e-12);
    assert!(concession(&[(PRICE, -1)], &prev, &fv(&[(0, 0.6), (1, 0.5)])).abs() < 1e-12);
    let c = concession(&[(PRICE, -1), (DELIVERY, -1)], &prev, &fv(&[(0, 0.4), (1, 0.6)]));
    assert!((c - 0.1).abs() < 1e-12);
}

#[test]
fn own_gain_hand_cases() {
    let mut w = [0.0; DIM];
    w[1] = 0.4;
    w[2] = -0.35;
    w[3] = 0.25;
    let p = UtilityProfile::from_weights(Role::Seller, w);
    let prev = FeatureVector::zeros();
    let g = own_gain(&p, &prev, &fv(&[(1, 0.2), (2, 0.1), (3, 0.0)]), 3);
    assert!((g - (0.2 - 0.1 + 0.0) / 3.0).abs() < 1e-12);
    assert_eq!(own_gain(&p, &prev, &prev, 3), 0.0);
    let g = own_gain(&p, &fv(&[(2, 1.0)]), &fv(&[(1, 1.0), (3, 1.0)]), 3);
    assert!((g - 1.0).abs() < 1e-12);
}

#[test]
fn alignment_hand_cases() {
    assert!((alignment_score(1, 0.8) - 0.3).abs() < 1e-12);
    assert!(alignment_score(-1, 0.5).abs() < 1e-12);
    assert!((alignment_score(-1, 0.9) + 0.4).abs() < 1e-12);
}

#[test]
fn keyword_extraction_examples() {
    assert_eq!(keyword_beliefs("the seller wants a higher price", Role::Buyer), vec![(PRICE, 1)]);
    let sedan = Component { term: Term::Model, option: Some(0) };
    assert_eq!(keyword_beliefs("they prefer Sedans", Role::Buyer), vec![(sedan, 1)]);
    assert!(extract_beliefs("", Role::Buyer, 1, ExtractorBackend::Annotation, None).unwrap().beliefs.is_empty());
}

#[test]
fn accuracy_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let opp = sample_profile(Role::Seller, &mut rng);
    let top = top_k_components(&opp, 5);
    assert_eq!(signed_accuracy_at_k(&[], &opp, 5), None);
    let off_top = negotiate_core::domain::Component::all().find(|c| top.iter().all(|(t, _)| t != c)).unwrap();
    let acc = signed_accuracy_at_k(&[belief(top[0].0, top[0].1), belief(off_top, 1)], &opp, 5).unwrap();
    assert!((acc - 0.5).abs() < 1e-12);
    assert_eq!(signed_accuracy_at_k(&[belief(top[0].0, -top[0].1)], &opp, 5), Some(0.0));
}

fn template() -> TrialRecord {
    run_trial(&common::scripted_config(1, 2), Condition::SymmetricNone, 0, None).unwrap()
}

#[test]
fn condition_summary_edge_cases() {
    let mut r = template();
    r.outcome = Outcome::NoDeal { reason: NoDealReason::TurnCap };
    r.efficiency = None;
    let s = condition_summary(Condition::SymmetricNone, &[&r, &r]);
    assert_eq!(s.deal_rate.mean, Some(0.0));
    assert_eq!(s.buyer_utility, Stat::default());

    let mut d = template();
    let c = *d.outcome.contract().unwrap();
    d.outcome = Outcome::Deal { contract: c, buyer_utility: 0.6, seller_utility: 0.4 };
    let s = condition_summary(Condition::SymmetricNone, &[&d]);
    assert!((s.welfare.mean.unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(s.welfare.se, None);
}

#[test]
fn coupling_groups() {
    let mut r = template();
    for t in r.turns.iter_mut() {
        t.metrics.concession_c = Some(0.2);
        t.metrics.own_gain_g = Some(-0.1);
    }
    let rows = coupling_report(std::slice::from_ref(&r));
    for row in &rows {
        assert!((row.with_concession.mean.unwrap() + 0.1).abs() < 1e-12);
        assert_eq!(row.without_concession.n, 0);
        assert_eq!(row.without_concession.mean, None);
    }
    for t in r.turns.iter_mut() {
        t.metrics.concession_c = Some(0.0);
    }
    let rows = coupling_report(std::slice::from_ref(&r));
    assert!(rows.iter().all(|row| row.with_concession.n == 0 && row.with_concession.mean.is_none()));
}

/// Deal on `price` with the given profiles; the first proposal is at
/// `first` on the same contract.
fn anchored(base: &TrialRecord, buyer: UtilityProfile, seller: UtilityProfile, first: f64, price: f64) -> TrialRecord {
    let mut r = base.clone();
    r.buyer = buyer;
    r.seller = seller;
    let mut c: Contract = *base.outcome.contract().unwrap();
    c.continuous[Term::Price.index()] = price;
    r.outcome = Outcome::Deal { contract: c, buyer_utility: 0.5, seller_utility: 0.5 };
    let t0 = r.turns.iter_mut().find(|t| t.turn.action.terms.get(Term::Price).is_some()).unwrap();
    t0.turn.action.terms.set(Term::Price, TermValue::Number(first));
    r
}

#[test]
fn anchor_fits() {
    let base = template();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut same = Vec::new();
    let mut indep = Vec::new();
    for _ in 0..200 {
        let b = sample_profile(Role::Buyer, &mut rng);
        let s = sample_profile(Role::Seller, &mut rng);
        let first: f64 = rng.random_range(25.0..45.0);
        let price: f64 = rng.random_range(25.0..45.0);
        same.push(anchored(&base, b.clone(), s.clone(), first, first));
        indep.push(anchored(&base, b, s, first, price));
    }
    let rep = anchor_report(&same.iter().collect::<Vec<_>>(), None).unwrap();
    assert!((rep.first_price.pearson_r.unwrap() - 1.0).abs() < 1e-9);
    let rep = anchor_report(&indep.iter().collect::<Vec<_>>(), None).unwrap();
    assert!(rep.buyer_weight.pearson_r.unwrap().abs() < 0.15, "{:?}", rep.buyer_weight);
    assert!(rep.seller_weight.pearson_r.unwrap().abs() < 0.15, "{:?}", rep.seller_weight);
    let f = fit(&[1.0, 2.0, 3.0], &[4.0, 4.0, 4.0]).unwrap();
    assert_eq!(f.slope, Some(0.0));
    assert!(fit(&[1.0], &[1.0]).is_err());
}

#[test]
fn categorical_conflicts() {
    let mut r = template();
    // force a model conflict the deal resolves in the buyer's favour
    let mut bw = r.buyer.weights;
    bw[4..7].copy_from_slice(&[0.2, -0.1, -0.1]);
    let mut sw = r.seller.weights;
    sw[4..7].copy_from_slice(&[-0.1, 0.2, -0.1]);
    r.buyer = UtilityProfile::from_weights(Role::Buyer, bw);
    r.seller = UtilityProfile::from_weights(Role::Seller, sw);
    let mut c = *r.outcome.contract().unwrap();
    c.choices[0] = 0;
    r.outcome = Outcome::Deal { contract: c, buyer_utility: 0.5, seller_utility: 0.5 };
    let rows = categorical_conflict_report(&[&r, &r]);
    let model = rows.iter().find(|x| x.term == Term::Model).unwrap();
    assert_eq!((model.n, model.buyer_wins), (2, 2));
    assert_eq!(model.buyer_win_rate, Some(1.0));

    let mut agree = r.clone();
    agree.seller = UtilityProfile::from_weights(Role::Seller, {
        let mut w = sw;
        w[4..7].copy_from_slice(&[0.2, -0.1, -0.1]);
        w
    });
    let rows = categorical_conflict_report(&[&agree]);
    let model = rows.iter().find(|x| x.term == Term::Model).unwrap();
    assert_eq!(model.n, 0);
    assert_eq!(model.buyer_win_rate, None);
}

proptest! {
    #[test]
    fn alignment_is_antisymmetric(v in 0.0f64..=1.0, up in any::<bool>()) {
        let d = if up { 1 } else { -1 };
        prop_assert!((alignment_score(d, v) + alignment_score(-d, v)).abs() < 1e-15);
        prop_assert!((alignment_score(d, v) + alignment_score(d, 1.0 - v)).abs() < 1e-12);
    }

    #[test]
    fn concession_is_nonnegative_and_bounded(
        prev in prop::array::uniform4(0.0f64..=1.0),
        new in prop::array::uniform4(0.0f64..=1.0),
        dirs in prop::array::uniform4(any::<bool>()),
    ) {
        let p = fv(&[(0, prev[0]), (1, prev[1]), (2, prev[2]), (3, prev[3])]);
        let n = fv(&[(0, new[0]), (1, new[1]), (2, new[2]), (3, new[3])]);
        let beliefs: Vec<(Component, i8)> = (0..4).map(|i| (Component::from_index(i), if dirs[i] { 1 } else { -1 })).collect();
        let c = concession(&beliefs, &p, &n);
        prop_assert!(c >= 0.0 && c <= 4.0);
    }

    #[test]
    fn pooled_stat_equals_direct_mean(xs in prop::collection::vec(-1.0f64..1.0, 1..40), split in 0usize..40) {
        let k = split.min(xs.len());
        let (a, b) = xs.split_at(k);
        let whole = Stat::of(&xs);
        let sa = Stat::of(a);
        let sb = Stat::of(b);
        let pooled = (sa.mean.unwrap_or(0.0) * a.len() as f64 + sb.mean.unwrap_or(0.0) * b.len() as f64) / xs.len() as f64;
        prop_assert!((whole.mean.unwrap() - pooled).abs() < 1e-12);
    }
}
