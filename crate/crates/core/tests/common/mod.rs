//! Shared fixtures for integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use negotiate_core::condition::Condition;
use negotiate_core::domain::{Contract, PartialOffer, Role, Term, TermKind, TermValue, DIM};
use negotiate_core::prompts::{intel_block, preference_block, system_prompt, trade_plan_block, turn_prompt};
use negotiate_core::protocol::{Action, NegotiationState, Parties, TurnInput};
use negotiate_core::runner::ExperimentConfig;
use negotiate_core::utility::{best_joint_contract, sign_for, tier_summary, UtilityProfile};

/// Builds a profile the way the sampler does, from explicit group
/// magnitudes and preferred options, then L1-normalizes.
pub fn profile_from_groups(role: Role, magnitudes: [f64; 10], preferred: [usize; 5]) -> UtilityProfile {
    let mut w = [0.0; DIM];
    let mut cat = 0;
    for (g, term) in Term::ALL.iter().enumerate() {
        let off = term.schema().offset;
        match term.kind() {
            TermKind::Categorical => {
                let m = term.width();
                for i in 0..m {
                    w[off + i] = if i == preferred[cat] { magnitudes[g] } else { -magnitudes[g] / (m - 1) as f64 };
                }
                cat += 1;
            }
            _ => w[off] = sign_for(role, *term).unwrap() * magnitudes[g],
        }
    }
    let norm: f64 = w.iter().map(|x| x.abs()).sum();
    for x in &mut w {
        *x /= norm;
    }
    UtilityProfile::from_weights(role, w)
}

/// Hand-picked buyer: price and warranty matter most, colour barely.
pub fn fixture_buyer() -> UtilityProfile {
    profile_from_groups(Role::Buyer, [0.9, 0.35, 0.5, 0.2, 0.45, 0.1, 0.3, 0.8, 0.15, 0.25], [0, 2, 1, 2, 1])
}

/// Hand-picked seller: price and down payment critical.
pub fn fixture_seller() -> UtilityProfile {
    profile_from_groups(Role::Seller, [0.85, 0.2, 0.7, 0.4, 0.3, 0.12, 0.5, 0.1, 0.45, 0.2], [1, 0, 0, 0, 2])
}

/// Every weight on price, with the role's sign.
pub fn price_only(role: Role) -> UtilityProfile {
    let mut w = [0.0; DIM];
    w[Term::Price.schema().offset] = sign_for(role, Term::Price).unwrap();
    UtilityProfile::from_weights(role, w)
}

/// Scripted-agent experiment, single condition.
pub fn scripted_config(n_trials: usize, master_seed: u64) -> ExperimentConfig {
    let text = format!(
        "schema_version = 1\ncondition = symmetric_none\nn_trials = {n_trials}\nmaster_seed = {master_seed}\n\
         buyer_agent = conceder\nseller_agent = conceder\nconcurrency = 4\n"
    );
    ExperimentConfig::parse(&text).expect("fixture config parses")
}

/// Stub-backend experiment over the given condition expression.
pub fn stub_config(condition: &str, n_trials: usize, master_seed: u64) -> ExperimentConfig {
    let text = format!(
        "schema_version = 1\nendpoint_url = stub\nmodel_name = stub\ncondition = {condition}\n\
         n_trials = {n_trials}\nmaster_seed = {master_seed}\n"
    );
    ExperimentConfig::parse(&text).expect("fixture config parses")
}

/// Price maximizing the Nash product of the price-only pair, by a plain
/// 1-D grid over the joint price range.
pub fn price_only_nbs_by_grid(steps: usize) -> (f64, f64, f64) {
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0, 0.0);
    for i in 0..=steps {
        let p = 25.0 + 20.0 * i as f64 / steps as f64;
        let ub = 1.0 - (p - 20.0) / 25.0;
        let us = (p - 25.0) / 30.0;
        if ub * us > best.0 {
            best = (ub * us, p, ub, us);
        }
    }
    (best.1, best.2, best.3)
}

/// Own ranges written out independently of the library schema:
/// (buyer lo, buyer hi, seller lo, seller hi) for price, delivery, down
/// payment, trade-in.
pub const RANGES: [(f64, f64, f64, f64); 4] =
    [(20.0, 45.0, 25.0, 55.0), (1.0, 30.0, 7.0, 60.0), (0.0, 30.0, 15.0, 40.0), (5.0, 15.0, 0.0, 10.0)];
pub const JOINT: [(f64, f64); 4] = [(25.0, 45.0), (7.0, 30.0), (15.0, 30.0), (5.0, 10.0)];
/// Option counts of model, color, interior, warranty, service.
pub const WIDTHS: [usize; 5] = [3, 5, 3, 3, 3];

/// Hand-rolled feature vector: clamped min-max continuous values, one-hot
/// categoricals in layout order, accessories last.
pub fn hand_encode(role: Role, cont: [f64; 4], choices: [usize; 5], accessories: bool) -> [f64; DIM] {
    let mut f = [0.0; DIM];
    for i in 0..4 {
        let (lo, hi) = match role {
            Role::Buyer => (RANGES[i].0, RANGES[i].1),
            Role::Seller => (RANGES[i].2, RANGES[i].3),
        };
        f[i] = ((cont[i] - lo) / (hi - lo)).clamp(0.0, 1.0);
    }
    let mut off = 4;
    for (k, w) in WIDTHS.iter().enumerate() {
        f[off + choices[k]] = 1.0;
        off += w;
    }
    f[21] = if accessories { 1.0 } else { 0.0 };
    f
}

pub fn dot(w: &[f64; DIM], f: &[f64; DIM]) -> f64 {
    w.iter().zip(f).map(|(a, b)| a * b).sum()
}

/// Every discrete combination (810 of them).
pub fn all_discrete() -> Vec<([usize; 5], bool)> {
    let mut out = Vec::new();
    for m in 0..3 {
        for c in 0..5 {
            for i in 0..3 {
                for w in 0..3 {
                    for s in 0..3 {
                        for a in [false, true] {
                            out.push(([m, c, i, w, s], a));
                        }
                    }
                }
            }
        }
    }
    out
}

/// (min, max) of raw utility over the role's own feasible box, by
/// enumerating continuous endpoints and all discrete combinations.
pub fn hand_extremes(role: Role, w: &[f64; DIM]) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (choices, acc) in all_discrete() {
        for corner in 0..16 {
            let mut cont = [0.0; 4];
            for i in 0..4 {
                let (a, b) = match role {
                    Role::Buyer => (RANGES[i].0, RANGES[i].1),
                    Role::Seller => (RANGES[i].2, RANGES[i].3),
                };
                cont[i] = if corner >> i & 1 == 1 { b } else { a };
            }
            let u = dot(w, &hand_encode(role, cont, choices, acc));
            lo = lo.min(u);
            hi = hi.max(u);
        }
    }
    (lo, hi)
}

/// Non-dominated (buyer, seller) normalized points over a plain grid on
/// the joint continuous ranges times every discrete combination, plus the
/// best Nash product among them.
pub fn hand_grid_frontier(buyer: &UtilityProfile, seller: &UtilityProfile, steps: usize) -> (Vec<(f64, f64)>, f64) {
    let (bl, bh) = hand_extremes(Role::Buyer, &buyer.weights);
    let (sl, sh) = hand_extremes(Role::Seller, &seller.weights);
    let axis = |i: usize| -> Vec<f64> {
        (0..steps).map(|k| JOINT[i].0 + (JOINT[i].1 - JOINT[i].0) * k as f64 / (steps - 1) as f64).collect()
    };
    let axes: Vec<Vec<f64>> = (0..4).map(axis).collect();
    let mut pts = Vec::new();
    for (choices, acc) in all_discrete() {
        for a in &axes[0] {
            for b in &axes[1] {
                for c in &axes[2] {
                    for d in &axes[3] {
                        let cont = [*a, *b, *c, *d];
                        let ub = (dot(&buyer.weights, &hand_encode(Role::Buyer, cont, choices, acc)) - bl) / (bh - bl);
                        let us = (dot(&seller.weights, &hand_encode(Role::Seller, cont, choices, acc)) - sl) / (sh - sl);
                        pts.push((ub, us));
                    }
                }
            }
        }
    }
    pts.sort_by(|x, y| y.0.total_cmp(&x.0).then(y.1.total_cmp(&x.1)));
    let mut front = Vec::new();
    let mut best_s = f64::NEG_INFINITY;
    for p in pts {
        if p.1 > best_s {
            best_s = p.1;
            front.push(p);
        }
    }
    let nbs = front.iter().filter(|p| p.0 >= 0.0 && p.1 >= 0.0).map(|p| p.0 * p.1).fold(0.0, f64::max);
    (front, nbs)
}

pub fn pair_fixture() -> (UtilityProfile, UtilityProfile) {
    (fixture_buyer(), fixture_seller())
}

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden")
}

pub fn push(state: &mut NegotiationState, parties: Parties<'_>, dialogue: &str, action: Action) {
    let role = state.to_move();
    state
        .apply_action(
            TurnInput { role, dialogue: dialogue.into(), think: String::new(), raw_action: String::new(), action, events: vec![] },
            parties,
        )
        .unwrap();
}

/// Nine scripted turns ending with a complete offer on the table.
pub fn mid_game(buyer: &UtilityProfile, seller: &UtilityProfile) -> NegotiationState {
    let parties = Parties::new(buyer, seller);
    let mut s = NegotiationState::new(40);
    push(&mut s, parties, "Hi, I'm looking for a family car.", Action::counter(PartialOffer::new()));
    push(&mut s, parties, "Welcome! We have great SUVs in stock.", Action::counter(PartialOffer::new().with(Term::Model, TermValue::Choice(1))));
    push(&mut s, parties, "A Sedan around 30 would suit me.", Action::counter(
        PartialOffer::new().with(Term::Model, TermValue::Choice(0)).with(Term::Price, TermValue::Number(30.0)),
    ));
    push(&mut s, parties, "A Sedan at 30 is too low for us.", Action::counter(PartialOffer::new()));
    push(&mut s, parties, "What about delivery in two weeks?", Action::counter(PartialOffer::new().with(Term::Delivery, TermValue::Number(14.0))));
    push(&mut s, parties, "Let me put a full offer together.", Action::counter(PartialOffer::new()));
    push(&mut s, parties, "I'm waiting on your numbers.", Action::counter(PartialOffer::new()));
    let mut c: Contract = best_joint_contract(seller);
    c.continuous[Term::Price.index()] = 41.0;
    push(&mut s, parties, "Here is our complete proposal.", Action::counter(c.to_offer()));
    push(&mut s, parties, "I can do 33.5 on those terms.", Action::counter(PartialOffer::new().with(Term::Price, TermValue::Number(33.5))));
    s
}

/// Every prompt text covered by the checked-in golden files, by file name.
pub fn golden_texts() -> Vec<(&'static str, String)> {
    let buyer = fixture_buyer();
    let seller = fixture_seller();
    let parties = Parties::new(&buyer, &seller);
    let fresh = NegotiationState::new(40);
    let mut second = fresh.clone();
    push(&mut second, parties, "Hello! I'm shopping for a reliable car.", Action::counter(PartialOffer::new()));
    let mid = mid_game(&buyer, &seller);
    let mut files = vec![
        ("system_buyer.txt", system_prompt(Role::Buyer, &buyer)),
        ("system_seller.txt", system_prompt(Role::Seller, &seller)),
        ("preferences_seller.txt", preference_block(Role::Seller, &tier_summary(&seller))),
        ("turn_1_buyer_symmetric_none.txt", turn_prompt(&fresh, Condition::SymmetricNone, None)),
        ("turn_2_seller_symmetric_none.txt", turn_prompt(&second, Condition::SymmetricNone, None)),
        ("turn_10_seller_seller_informed.txt", turn_prompt(&mid, Condition::SellerInformed, Some(&buyer))),
        ("turn_1_buyer_informed_with_plan.txt", turn_prompt(&fresh, Condition::InformedWithPlan, Some(&seller))),
        ("intel_on_seller.txt", intel_block(&tier_summary(&seller))),
        ("intel_on_buyer.txt", intel_block(&tier_summary(&buyer))),
        ("trade_plan.txt", trade_plan_block().to_string()),
    ];
    for (i, t) in [31usize, 39].iter().enumerate() {
        let mut s = mid.clone();
        while s.next_turn() < *t {
            push(&mut s, parties, "Still thinking it over.", Action::counter(PartialOffer::new()));
        }
        let name = if i == 0 { "turn_31_buyer_symmetric_full.txt" } else { "turn_39_buyer_symmetric_full.txt" };
        files.push((name, turn_prompt(&s, Condition::SymmetricFull, Some(&seller))));
    }
    files
}

