//! Private linear utilities over the feature encoding: sampling, raw and
//! normalized utility, reservation values and preference tiers.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{encode_fast, joint_bounds, Contract, Role, Term, TermKind, DIM};

/// Lower bound of the per-group magnitude draw.
pub const MAGNITUDE_MIN: f64 = 0.05;
/// Upper bound of the per-group magnitude draw.
pub const MAGNITUDE_MAX: f64 = 1.0;

const CRITICAL_THRESHOLD: f64 = 0.6;
const IMPORTANT_THRESHOLD: f64 = 0.3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UtilityError {
    #[error("utility scale {0} is degenerate")]
    DegenerateScale(f64),
    #[error("weight vector has length {0}, expected {DIM}")]
    BadLength(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Tier {
    Critical,
    Important,
    Flexible,
}

impl Tier {
    pub fn label(self) -> &'static str {
        match self {
            Tier::Critical => "CRITICAL",
            Tier::Important => "IMPORTANT",
            Tier::Flexible => "FLEXIBLE",
        }
    }

    pub fn from_relative(r: f64) -> Tier {
        if r > CRITICAL_THRESHOLD {
            Tier::Critical
        } else if r > IMPORTANT_THRESHOLD {
            Tier::Important
        } else {
            Tier::Flexible
        }
    }
}

/// Preferred direction of movement for one feature group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "option", rename_all = "snake_case")]
pub enum Direction {
    Increase,
    Decrease,
    Choose(String),
    Include,
    Exclude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierEntry {
    pub group: Term,
    pub tier: Tier,
    pub direction: Direction,
    /// |w_group| / max |w_group|
    pub relative: f64,
}

/// Sign of the continuous and accessories weights for a role.
pub fn sign_for(role: Role, term: Term) -> Option<f64> {
    let buyer = match term {
        Term::Price | Term::Delivery | Term::DownPayment => -1.0,
        Term::TradeIn | Term::Accessories => 1.0,
        _ => return None,
    };
    Some(match role {
        Role::Buyer => buyer,
        Role::Seller => -buyer,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityProfile {
    pub role: Role,
    #[serde(with = "weights_serde")]
    pub weights: [f64; DIM],
    pub reservation: f64,
    pub best_utility: f64,
    pub preferred_options: BTreeMap<Term, String>,
    pub tiers: Vec<TierEntry>,
}

mod weights_serde {
    use super::DIM;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(w: &[f64; DIM], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(w.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; DIM], D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        v.try_into()
            .map_err(|v: Vec<f64>| serde::de::Error::custom(format!("expected {DIM} weights, got {}", v.len())))
    }
}

impl UtilityProfile {
    /// Builds a profile from explicit weights, deriving reservation, best
    /// utility, preferred options and tiers. Weights are used as given.
    pub fn from_weights(role: Role, weights: [f64; DIM]) -> Self {
        let mut p = UtilityProfile {
            role,
            weights,
            reservation: 0.0,
            best_utility: 0.0,
            preferred_options: BTreeMap::new(),
            tiers: Vec::new(),
        };
        let (reservation, best) = reservation_and_scale(&p);
        p.reservation = reservation;
        p.best_utility = best;
        for t in Term::CATEGORICAL {
            let idx = p.preferred_index(t);
            p.preferred_options.insert(t, t.options()[idx].to_string());
        }
        p.tiers = tier_summary(&p);
        p
    }

    pub fn from_slice(role: Role, weights: &[f64]) -> Result<Self, UtilityError> {
        let w: [f64; DIM] = weights.try_into().map_err(|_| UtilityError::BadLength(weights.len()))?;
        Ok(Self::from_weights(role, w))
    }

    /// Index of the highest-weight option of a categorical term.
    pub fn preferred_index(&self, term: Term) -> usize {
        let off = term.schema().offset;
        let block = &self.weights[off..off + term.width()];
        let mut best = 0;
        for (i, w) in block.iter().enumerate() {
            if *w > block[best] {
                best = i;
            }
        }
        best
    }

    /// Weight representing a whole feature group (preferred option for
    /// categorical terms).
    pub fn group_weight(&self, term: Term) -> f64 {
        let off = term.schema().offset;
        match term.kind() {
            TermKind::Categorical => self.weights[off + self.preferred_index(term)],
            _ => self.weights[off],
        }
    }

    pub fn scale(&self) -> f64 {
        self.best_utility - self.reservation
    }

    pub fn l1_norm(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    /// Checks the role sign table and categorical contrast structure.
    pub fn sign_constraints_hold(&self) -> bool {
        let signs_ok = Term::ALL.iter().all(|t| match sign_for(self.role, *t) {
            Some(s) => self.weights[t.schema().offset] * s > 0.0,
            None => true,
        });
        let categorical_ok = Term::CATEGORICAL.iter().all(|t| {
            let off = t.schema().offset;
            let block = &self.weights[off..off + t.width()];
            let positives: Vec<f64> = block.iter().copied().filter(|w| *w > 0.0).collect();
            if positives.len() != 1 {
                return false;
            }
            let negs: Vec<f64> = block.iter().copied().filter(|w| *w <= 0.0).collect();
            let share = -positives[0] / (t.width() - 1) as f64;
            negs.iter().all(|w| (w - share).abs() < 1e-12)
        });
        signs_ok && categorical_ok
    }
}

/// Samples a profile: one magnitude per feature group from
/// `Uniform(MAGNITUDE_MIN, MAGNITUDE_MAX)`, role signs, a uniformly drawn
/// preferred option per categorical term with the alternatives sharing the
/// negated magnitude, then L1 normalization.
pub fn sample_profile<R: Rng + ?Sized>(role: Role, rng: &mut R) -> UtilityProfile {
    let mut w = [0.0; DIM];
    for term in Term::ALL {
        let magnitude: f64 = rng.random_range(MAGNITUDE_MIN..MAGNITUDE_MAX);
        let off = term.schema().offset;
        match term.kind() {
            TermKind::Categorical => {
                let m = term.width();
                let preferred = rng.random_range(0..m);
                for i in 0..m {
                    w[off + i] = if i == preferred { magnitude } else { -magnitude / (m - 1) as f64 };
                }
            }
            _ => w[off] = sign_for(role, term).expect("signed term") * magnitude,
        }
    }
    let norm: f64 = w.iter().map(|x: &f64| x.abs()).sum();
    for x in &mut w {
        *x /= norm;
    }
    UtilityProfile::from_weights(role, w)
}

/// Raw utility θᵀφ(x) under the role's clamped encoding.
pub fn utility(profile: &UtilityProfile, contract: &Contract) -> f64 {
    encode_fast(contract, profile.role).dot(&profile.weights)
}

/// (U − d) / (best − d), unclamped.
pub fn normalized_utility(profile: &UtilityProfile, contract: &Contract) -> Result<f64, UtilityError> {
    let scale = profile.scale();
    if !(scale >= 1e-12) {
        return Err(UtilityError::DegenerateScale(scale));
    }
    Ok((utility(profile, contract) - profile.reservation) / scale)
}

fn extreme_contract(profile: &UtilityProfile, best: bool) -> Contract {
    let mut c = Contract { continuous: [0.0; 4], choices: [0; 5], accessories: false };
    for t in Term::CONTINUOUS {
        let r = t.range(profile.role).expect("continuous");
        let w = profile.weights[t.index()];
        let high = (w > 0.0) == best;
        c.continuous[t.index()] = if high { r.hi } else { r.lo };
    }
    for (slot, t) in Term::CATEGORICAL.iter().enumerate() {
        let off = t.schema().offset;
        let block = &profile.weights[off..off + t.width()];
        let mut pick = 0;
        for (i, w) in block.iter().enumerate() {
            let better = if best { *w > block[pick] } else { *w < block[pick] };
            if better {
                pick = i;
            }
        }
        c.choices[slot] = pick as u8;
    }
    let wa = profile.weights[Term::Accessories.schema().offset];
    c.accessories = (wa > 0.0) == best;
    c
}

/// Worst feasible contract within the role's own ranges.
pub fn worst_contract(profile: &UtilityProfile) -> Contract {
    extreme_contract(profile, false)
}

/// Best feasible contract within the role's own ranges.
pub fn best_contract(profile: &UtilityProfile) -> Contract {
    extreme_contract(profile, true)
}

/// Best contract restricted to the joint (both-role) continuous bounds.
pub fn best_joint_contract(profile: &UtilityProfile) -> Contract {
    let mut c = best_contract(profile);
    for t in Term::CONTINUOUS {
        let j = joint_bounds(t).expect("continuous");
        c.continuous[t.index()] = j.clamp(c.continuous[t.index()]);
    }
    c
}

/// Utilities of the worst and best feasible contracts.
pub fn reservation_and_scale(profile: &UtilityProfile) -> (f64, f64) {
    (utility(profile, &worst_contract(profile)), utility(profile, &best_contract(profile)))
}

/// Tiered listing of feature groups by relative weight magnitude.
pub fn tier_summary(profile: &UtilityProfile) -> Vec<TierEntry> {
    let max = Term::ALL
        .iter()
        .map(|t| profile.group_weight(*t).abs())
        .fold(0.0_f64, f64::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let mut entries: Vec<TierEntry> = Term::ALL
        .iter()
        .filter_map(|t| {
            let w = profile.group_weight(*t);
            if w == 0.0 {
                return None;
            }
            let direction = match t.kind() {
                TermKind::Continuous => {
                    if w > 0.0 {
                        Direction::Increase
                    } else {
                        Direction::Decrease
                    }
                }
                TermKind::Categorical => Direction::Choose(t.options()[profile.preferred_index(*t)].to_string()),
                TermKind::Binary => {
                    if w > 0.0 {
                        Direction::Include
                    } else {
                        Direction::Exclude
                    }
                }
            };
            let relative = w.abs() / max;
            Some(TierEntry { group: *t, tier: Tier::from_relative(relative), direction, relative })
        })
        .collect();
    // stable sort keeps layout order among equal magnitudes
    entries.sort_by(|a, b| a.tier.cmp(&b.tier).then(b.relative.total_cmp(&a.relative)));
    entries
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn price_only(role: Role) -> UtilityProfile {
        let mut w = [0.0; DIM];
        w[0] = if role == Role::Buyer { -1.0 } else { 1.0 };
        UtilityProfile::from_weights(role, w)
    }

    #[test]
    fn sampled_profiles_are_normalized_and_signed() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for role in [Role::Buyer, Role::Seller] {
            for _ in 0..500 {
                let p = sample_profile(role, &mut rng);
                assert!((p.l1_norm() - 1.0).abs() < 1e-9);
                assert!(p.sign_constraints_hold());
                assert!(p.reservation < p.best_utility);
                if role == Role::Buyer {
                    assert!(p.weights[0] < 0.0);
                } else {
                    assert!(p.weights[0] > 0.0);
                }
            }
        }
    }

    #[test]
    fn categorical_split_is_equal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = sample_profile(Role::Buyer, &mut rng);
        let off = Term::Model.schema().offset;
        let pref = p.preferred_index(Term::Model);
        let w = p.weights[off + pref];
        for i in 0..3 {
            if i != pref {
                assert!((p.weights[off + i] + w / 2.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn dot_product_example() {
        let mut w = [0.0; DIM];
        w[0] = 0.6;
        w[1] = 0.4;
        let p = UtilityProfile::from_weights(Role::Seller, w);
        // price_norm 0.5 -> 40 in [25,55]; delivery_norm 1 -> 60
        let c = Contract { continuous: [40.0, 60.0, 15.0, 0.0], choices: [0; 5], accessories: false };
        assert!((utility(&p, &c) - 0.7).abs() < 1e-12);
        let zero = UtilityProfile::from_weights(Role::Seller, [0.0; DIM]);
        assert_eq!(utility(&zero, &c), 0.0);
    }

    #[test]
    fn worst_and_best_normalize_to_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = sample_profile(Role::Buyer, &mut rng);
        let worst = worst_contract(&p);
        assert_eq!(worst.price(), 45.0);
        assert!((utility(&p, &worst) - p.reservation).abs() < 1e-15);
        assert!(normalized_utility(&p, &worst).unwrap().abs() < 1e-12);
        assert!((normalized_utility(&p, &best_contract(&p)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn price_only_buyer_normalized() {
        let p = price_only(Role::Buyer);
        let mut c = best_contract(&p);
        c.continuous[0] = 35.0;
        let got = normalized_utility(&p, &c).unwrap();
        // 1-D grid oracle over the buyer range
        let oracle = (0..=2500)
            .map(|i| 20.0 + i as f64 * 0.01)
            .find(|x| (x - 35.0).abs() < 1e-9)
            .map(|x| 1.0 - (x - 20.0) / 25.0)
            .unwrap();
        assert!((got - 0.4).abs() < 1e-12);
        assert!((got - oracle).abs() < 1e-12);
    }

    #[test]
    fn degenerate_scale_is_reported() {
        let p = UtilityProfile::from_weights(Role::Buyer, [0.0; DIM]);
        let c = best_contract(&p);
        assert!(matches!(normalized_utility(&p, &c), Err(UtilityError::DegenerateScale(_))));
    }

    #[test]
    fn tier_thresholds() {
        assert_eq!(Tier::from_relative(1.0), Tier::Critical);
        assert_eq!(Tier::from_relative(0.5), Tier::Important);
        assert_eq!(Tier::from_relative(0.1), Tier::Flexible);
        assert_eq!(Tier::from_relative(0.6), Tier::Important);
        assert_eq!(Tier::from_relative(0.3), Tier::Flexible);
    }

    #[test]
    fn tier_ordering_and_directions() {
        let mut w = [0.0; DIM];
        w[0] = 0.5; // price, seller +
        w[3] = -0.2; // trade-in
        w[1] = 0.15;
        w[21] = -0.05;
        let off = Term::Model.schema().offset;
        w[off + 2] = 0.1;
        w[off] = -0.05;
        w[off + 1] = -0.05;
        let p = UtilityProfile::from_weights(Role::Seller, w);
        let t = &p.tiers;
        assert_eq!(t[0].group, Term::Price);
        assert_eq!(t[0].tier, Tier::Critical);
        assert_eq!(t[0].direction, Direction::Increase);
        assert_eq!(t[1].group, Term::TradeIn);
        assert_eq!(t[1].tier, Tier::Important);
        assert_eq!(t[1].direction, Direction::Decrease);
        assert_eq!(t[2].group, Term::Delivery);
        assert_eq!(t[2].tier, Tier::Flexible);
        assert_eq!(t[3].direction, Direction::Choose("Truck".into()));
        assert_eq!(t[4].direction, Direction::Exclude);
        assert_eq!(t.len(), 5);
    }

    #[test]
    fn profile_json_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = sample_profile(Role::Seller, &mut rng);
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"role\":\"seller\""));
        let back: UtilityProfile = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
