//! Turn-level strategy metrics and the aggregate reports built on them.
//!
//! Offer deltas are taken in the acting agent's clamped normalized
//! encoding, between consecutive complete offers made by the same agent.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beliefs::{latest_directions, signed_accuracy_at_k, turn_alignment, Belief};
use crate::condition::Condition;
use crate::domain::{encode_fast, Component, Contract, FeatureVector, Role, Term, TermValue, DIM};
use crate::protocol::{ActionKind, Outcome, Turn};
use crate::record::{TrialRecord, TurnMetrics};
use crate::utility::UtilityProfile;

/// Components averaged in the own-gain metric.
pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },
}

/// c = Σ_f max(0, d_f · Δ_f) over the mentioned features (latest
/// direction per feature).
pub fn concession(beliefs: &[(Component, i8)], prev: &FeatureVector, new: &FeatureVector) -> f64 {
    let mut latest: BTreeMap<Component, i8> = BTreeMap::new();
    for (c, d) in beliefs {
        latest.insert(*c, *d);
    }
    latest
        .iter()
        .map(|(c, d)| {
            let i = c.index();
            (f64::from(*d) * (new.0[i] - prev.0[i])).max(0.0)
        })
        .sum()
}

/// Indices of the k largest-|weight| components, ties in layout order.
pub fn top_k_indices(weights: &[f64; DIM], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..DIM).collect();
    idx.sort_by(|a, b| weights[*b].abs().total_cmp(&weights[*a].abs()));
    idx.truncate(k);
    idx
}

/// g = (1/K) Σ_k sign(θ_k) · Δ_k over the K largest-|weight| components.
pub fn own_gain(profile: &UtilityProfile, prev: &FeatureVector, new: &FeatureVector, k: usize) -> f64 {
    assert!(k >= 1, "K must be positive");
    let idx = top_k_indices(&profile.weights, k);
    let sum: f64 = idx
        .iter()
        .map(|&i| {
            let w = profile.weights[i];
            let s = if w > 0.0 {
                1.0
            } else if w < 0.0 {
                -1.0
            } else {
                0.0
            };
            s * (new.0[i] - prev.0[i])
        })
        .sum();
    sum / idx.len() as f64
}

/// The contract a turn proposes: a COUNTER with terms that resolved to a
/// complete offer.
pub fn proposed_contract(turn: &Turn) -> Option<&Contract> {
    if turn.action.kind != ActionKind::Counter || turn.action.terms.is_empty() {
        return None;
    }
    turn.resolved_offer.as_contract()
}

/// Metrics for every turn. `beliefs[i]` is `None` when extraction failed
/// for turn `i`.
pub fn turn_metrics(
    turns: &[Turn],
    beliefs: &[Option<&[Belief]>],
    buyer: &UtilityProfile,
    seller: &UtilityProfile,
    k: usize,
) -> Vec<TurnMetrics> {
    let mut last: [Option<FeatureVector>; 2] = [None, None];
    let slot = |r: Role| match r {
        Role::Buyer => 0,
        Role::Seller => 1,
    };
    turns
        .iter()
        .zip(beliefs)
        .map(|(turn, bel)| {
            let role = turn.role;
            let profile = if role == Role::Buyer { buyer } else { seller };
            let mut m = TurnMetrics::default();
            let items: Vec<(Component, i8)> =
                bel.map(|b| latest_directions(b).into_iter().collect()).unwrap_or_default();
            m.mentioned_features = items.iter().map(|(c, _)| c.id()).collect();
            let Some(contract) = proposed_contract(turn) else {
                return m;
            };
            let new = encode_fast(contract, role);
            if let Some(prev) = last[slot(role)] {
                m.own_gain_g = Some(own_gain(profile, &prev, &new, k));
                if let Some(b) = bel {
                    if !b.is_empty() {
                        m.concession_c = Some(concession(&items, &prev, &new));
                    }
                }
            }
            if let Some(b) = bel {
                m.alignment_mean = turn_alignment(b, &turn.resolved_offer, role);
            }
            last[slot(role)] = Some(new);
            m
        })
        .collect()
}

/// Recomputes metrics for a stored trial from its turns and beliefs.
pub fn recompute(record: &TrialRecord) -> Vec<TurnMetrics> {
    let turns: Vec<Turn> = record.turns.iter().map(|t| t.turn.clone()).collect();
    let beliefs: Vec<Option<&[Belief]>> = record
        .turns
        .iter()
        .map(|t| t.belief_status.is_ok().then_some(t.beliefs.as_slice()))
        .collect();
    turn_metrics(&turns, &beliefs, &record.buyer, &record.seller, record.top_k)
}

/// Sample mean and standard error (sd/√n, sd with n−1).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub n: usize,
    pub mean: Option<f64>,
    pub se: Option<f64>,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len();
        if n == 0 {
            return Stat::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = (n >= 2).then(|| {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        });
        Stat { n, mean: Some(mean), se }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: Condition,
    pub n_trials: usize,
    pub n_deals: usize,
    /// Over all trials.
    pub deal_rate: Stat,
    /// Over agreed deals.
    pub buyer_utility: Stat,
    pub seller_utility: Stat,
    pub welfare: Stat,
    pub d_pareto: Stat,
    pub d_nbs: Stat,
}

impl ConditionSummary {
    pub fn no_deal_rate(&self) -> Option<f64> {
        self.deal_rate.mean.map(|r| 1.0 - r)
    }
}

pub fn condition_summary(condition: Condition, trials: &[&TrialRecord]) -> ConditionSummary {
    let deals: Vec<f64> = trials.iter().map(|t| if t.outcome.is_deal() { 1.0 } else { 0.0 }).collect();
    let (mut ub, mut us, mut w, mut dp, mut dn) = (vec![], vec![], vec![], vec![], vec![]);
    for t in trials {
        if let Outcome::Deal { buyer_utility, seller_utility, .. } = t.outcome {
            ub.push(buyer_utility);
            us.push(seller_utility);
            w.push(buyer_utility + seller_utility);
            if let Some(e) = &t.efficiency {
                dp.push(e.d_pareto);
                dn.push(e.d_nbs);
            }
        }
    }
    ConditionSummary {
        condition,
        n_trials: trials.len(),
        n_deals: ub.len(),
        deal_rate: Stat::of(&deals),
        buyer_utility: Stat::of(&ub),
        seller_utility: Stat::of(&us),
        welfare: Stat::of(&w),
        d_pareto: Stat::of(&dp),
        d_nbs: Stat::of(&dn),
    }
}

/// Trials grouped by condition, in condition order.
pub fn by_condition(trials: &[TrialRecord]) -> BTreeMap<Condition, Vec<&TrialRecord>> {
    let mut out: BTreeMap<Condition, Vec<&TrialRecord>> = BTreeMap::new();
    for t in trials {
        out.entry(t.condition).or_default().push(t);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingRow {
    pub condition: Condition,
    pub role: Role,
    /// Own gain on turns with c > 0.
    pub with_concession: Stat,
    /// Own gain on turns with c = 0.
    pub without_concession: Stat,
}

/// Own gain split by whether the turn conceded toward believed opponent
/// preferences.
pub fn coupling_report(trials: &[TrialRecord]) -> Vec<CouplingRow> {
    let mut rows = Vec::new();
    for (condition, group) in by_condition(trials) {
        for role in [Role::Buyer, Role::Seller] {
            let (mut pos, mut zero) = (vec![], vec![]);
            for t in group.iter().flat_map(|r| r.turns.iter()).filter(|t| t.turn.role == role) {
                if let (Some(c), Some(g)) = (t.metrics.concession_c, t.metrics.own_gain_g) {
                    if c > 0.0 {
                        pos.push(g);
                    } else {
                        zero.push(g);
                    }
                }
            }
            rows.push(CouplingRow {
                condition,
                role,
                with_concession: Stat::of(&pos),
                without_concession: Stat::of(&zero),
            });
        }
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub n: usize,
    /// Undefined when either variable is constant.
    pub pearson_r: Option<f64>,
    /// Least-squares slope of y on x; 0 when y is constant, undefined when
    /// x is constant.
    pub slope: Option<f64>,
}

pub fn fit(xs: &[f64], ys: &[f64]) -> Result<Fit, MetricsError> {
    let n = xs.len().min(ys.len());
    if n < 3 {
        return Err(MetricsError::InsufficientData { needed: 3, got: n });
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (dx, dy) = (xs[i] - mx, ys[i] - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let slope = if sxx > 0.0 {
        Some(if syy > 0.0 { sxy / sxx } else { 0.0 })
    } else {
        None
    };
    let pearson_r = (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0));
    Ok(Fit { n, pearson_r, slope })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorPoint {
    pub first_price: f64,
    pub final_price: f64,
    /// |price weight| of each party.
    pub buyer_price_weight: f64,
    pub seller_price_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorReport {
    pub points: Vec<AnchorPoint>,
    pub first_price: Fit,
    pub buyer_weight: Fit,
    pub seller_weight: Fit,
}

/// Price in the earliest action whose terms include a price.
pub fn first_proposed_price(record: &TrialRecord) -> Option<f64> {
    record.turns.iter().find_map(|t| t.turn.action.terms.get(Term::Price).and_then(|v| v.as_number()))
}

/// Final agreed price against the first proposed price and each party's
/// price weight, over deals (optionally only deals on one model).
pub fn anchor_report(trials: &[&TrialRecord], model: Option<&str>) -> Result<AnchorReport, MetricsError> {
    let want = model.and_then(|m| Term::Model.option_index_loose(m));
    let points: Vec<AnchorPoint> = trials
        .iter()
        .filter_map(|t| {
            let c = t.outcome.contract()?;
            if let Some(w) = want {
                if c.get(Term::Model) != TermValue::Choice(w as u8) {
                    return None;
                }
            }
            Some(AnchorPoint {
                first_price: first_proposed_price(t)?,
                final_price: c.price(),
                buyer_price_weight: t.buyer.weights[Term::Price.index()].abs(),
                seller_price_weight: t.seller.weights[Term::Price.index()].abs(),
            })
        })
        .collect();
    let col = |f: fn(&AnchorPoint) -> f64| points.iter().map(f).collect::<Vec<_>>();
    let y = col(|p| p.final_price);
    Ok(AnchorReport {
        first_price: fit(&col(|p| p.first_price), &y)?,
        buyer_weight: fit(&col(|p| p.buyer_price_weight), &y)?,
        seller_weight: fit(&col(|p| p.seller_price_weight), &y)?,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictRow {
    pub term: Term,
    /// Deals where the two preferred options differ.
    pub n: usize,
    pub buyer_wins: usize,
    pub seller_wins: usize,
    pub buyer_win_rate: Option<f64>,
    /// Mean agreed price when the deal carries the buyer's option.
    pub price_buyer_won: Option<f64>,
    /// Mean agreed price when the deal carries the seller's option.
    pub price_seller_won: Option<f64>,
    pub price_difference: Option<f64>,
}

pub fn categorical_conflict_report(trials: &[&TrialRecord]) -> Vec<ConflictRow> {
    Term::CATEGORICAL
        .iter()
        .map(|&term| {
            let (mut n, mut bw, mut sw) = (0, 0, 0);
            let (mut pb, mut ps) = (vec![], vec![]);
            for t in trials {
                let Some(c) = t.outcome.contract() else { continue };
                let b = t.buyer.preferred_index(term) as u8;
                let s = t.seller.preferred_index(term) as u8;
                if b == s {
                    continue;
                }
                n += 1;
                let got = c.get(term);
                if got == TermValue::Choice(b) {
                    bw += 1;
                    pb.push(c.price());
                } else if got == TermValue::Choice(s) {
                    sw += 1;
                    ps.push(c.price());
                }
            }
            let mean = |v: &[f64]| Stat::of(v).mean;
            let (mb, ms) = (mean(&pb), mean(&ps));
            ConflictRow {
                term,
                n,
                buyer_wins: bw,
                seller_wins: sw,
                buyer_win_rate: (n > 0).then(|| bw as f64 / n as f64),
                price_buyer_won: mb,
                price_seller_won: ms,
                price_difference: mb.zip(ms).map(|(a, b)| a - b),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub bin_start: f64,
    pub bin_end: f64,
    pub accuracy: Stat,
}

/// Cumulative signed accuracy@k of `role`'s beliefs against turn fraction
/// `turn_index / final_turn_index`, averaged per bin. Turns without any
/// cumulative prediction are left out.
pub fn accuracy_curve(trials: &[&TrialRecord], role: Role, k: usize, bins: usize) -> Vec<CurvePoint> {
    let bins = bins.max(1);
    let mut acc: Vec<Vec<f64>> = vec![Vec::new(); bins];
    for t in trials {
        let last = t.final_turn_index();
        if last == 0 {
            continue;
        }
        let opponent = t.profile(role.opponent());
        let mut cumulative: Vec<Belief> = Vec::new();
        for tr in t.turns.iter().filter(|x| x.turn.role == role) {
            if tr.belief_status.is_ok() {
                cumulative.extend_from_slice(&tr.beliefs);
            }
            if let Some(a) = signed_accuracy_at_k(&cumulative, opponent, k) {
                let frac = tr.turn.index as f64 / last as f64;
                let b = ((frac * bins as f64) as usize).min(bins - 1);
                acc[b].push(a);
            }
        }
    }
    acc.iter()
        .enumerate()
        .map(|(i, v)| CurvePoint {
            bin_start: i as f64 / bins as f64,
            bin_end: (i + 1) as f64 / bins as f64,
            accuracy: Stat::of(v),
        })
        .collect()
}

/// Per-turn mean alignment averaged over the role's turns.
pub fn alignment_summary(trials: &[&TrialRecord], role: Role) -> Stat {
    let v: Vec<f64> = trials
        .iter()
        .flat_map(|t| t.turns.iter())
        .filter(|t| t.turn.role == role)
        .filter_map(|t| t.metrics.alignment_mean)
        .collect();
    Stat::of(&v)
}

/// Checks stored metrics against a recomputation; returns the first turn
/// index that differs.
pub fn first_metric_mismatch(record: &TrialRecord) -> Option<usize> {
    let fresh = recompute(record);
    record
        .turns
        .iter()
        .zip(&fresh)
        .find(|(t, m)| &t.metrics != *m)
        .map(|(t, _)| t.turn.index)
        .or_else(|| (fresh.len() != record.turns.len()).then_some(fresh.len()))
}
