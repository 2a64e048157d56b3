//! Car-purchase negotiation domain: the ten terms, their feasible ranges,
//! contract representation and the per-role feature encoding.
//!
//! Feature layout (22 components):
//!
//! | index | component |
//! |-------|-----------|
//! | 0..4  | price, delivery, down_payment, trade_in (range-normalized) |
//! | 4..7  | model: Sedan, SUV, Truck |
//! | 7..12 | color: White, Black, Silver, Blue, Red |
//! | 12..15| interior: Standard, Premium, Luxury |
//! | 15..18| warranty: none, basic, extended |
//! | 18..21| service: none, annual, comprehensive |
//! | 21    | accessories (0/1) |

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dimension of the feature vector.
pub const DIM: usize = 22;

/// Number of negotiable terms.
pub const N_TERMS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("{term} value {value} outside [{lo}, {hi}]")]
    ValueOutOfRange { term: Term, value: f64, lo: f64, hi: f64 },
    #[error("empty joint interval for {0}")]
    EmptyIntersection(Term),
    #[error("{0} is not a continuous term")]
    NotContinuous(Term),
    #[error("unknown term `{0}`")]
    UnknownTerm(String),
    #[error("unknown option `{option}` for {term}")]
    UnknownOption { term: Term, option: String },
    #[error("value of wrong kind for {0}")]
    KindMismatch(Term),
    #[error("offer is missing {0}")]
    Incomplete(Term),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Buyer,
    Seller,
}

impl Role {
    pub fn opponent(self) -> Role {
        match self {
            Role::Buyer => Role::Seller,
            Role::Seller => Role::Buyer,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Buyer => "buyer",
            Role::Seller => "seller",
        }
    }

    pub fn upper(self) -> &'static str {
        match self {
            Role::Buyer => "BUYER",
            Role::Seller => "SELLER",
        }
    }

    /// Role that moves on a given conversation turn (buyer opens).
    pub fn for_turn(turn_index: usize) -> Role {
        if turn_index % 2 == 1 {
            Role::Buyer
        } else {
            Role::Seller
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    Continuous,
    Categorical,
    Binary,
}

/// Closed real interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Price,
    Delivery,
    DownPayment,
    TradeIn,
    Model,
    Color,
    Interior,
    Warranty,
    Service,
    Accessories,
}

/// Static description of one negotiation term.
#[derive(Debug, Clone, Copy)]
pub struct TermSchema {
    pub term: Term,
    pub name: &'static str,
    pub kind: TermKind,
    pub buyer_range: Option<Interval>,
    pub seller_range: Option<Interval>,
    pub options: &'static [&'static str],
    /// Offset of the term's first component in the feature vector.
    pub offset: usize,
}

const MODELS: &[&str] = &["Sedan", "SUV", "Truck"];
const COLORS: &[&str] = &["White", "Black", "Silver", "Blue", "Red"];
const INTERIORS: &[&str] = &["Standard", "Premium", "Luxury"];
const WARRANTIES: &[&str] = &["none", "basic", "extended"];
const SERVICES: &[&str] = &["none", "annual", "comprehensive"];

const fn continuous(term: Term, name: &'static str, buyer: Interval, seller: Interval, offset: usize) -> TermSchema {
    TermSchema {
        term,
        name,
        kind: TermKind::Continuous,
        buyer_range: Some(buyer),
        seller_range: Some(seller),
        options: &[],
        offset,
    }
}

const fn categorical(term: Term, name: &'static str, options: &'static [&'static str], offset: usize) -> TermSchema {
    TermSchema {
        term,
        name,
        kind: TermKind::Categorical,
        buyer_range: None,
        seller_range: None,
        options,
        offset,
    }
}

static SCHEMA: [TermSchema; N_TERMS] = [
    continuous(Term::Price, "price", Interval::new(20.0, 45.0), Interval::new(25.0, 55.0), 0),
    continuous(Term::Delivery, "delivery", Interval::new(1.0, 30.0), Interval::new(7.0, 60.0), 1),
    continuous(Term::DownPayment, "down_payment", Interval::new(0.0, 30.0), Interval::new(15.0, 40.0), 2),
    continuous(Term::TradeIn, "trade_in", Interval::new(5.0, 15.0), Interval::new(0.0, 10.0), 3),
    categorical(Term::Model, "model", MODELS, 4),
    categorical(Term::Color, "color", COLORS, 7),
    categorical(Term::Interior, "interior", INTERIORS, 12),
    categorical(Term::Warranty, "warranty", WARRANTIES, 15),
    categorical(Term::Service, "service", SERVICES, 18),
    TermSchema {
        term: Term::Accessories,
        name: "accessories",
        kind: TermKind::Binary,
        buyer_range: None,
        seller_range: None,
        options: &[],
        offset: 21,
    },
];

impl Term {
    pub const ALL: [Term; N_TERMS] = [
        Term::Price,
        Term::Delivery,
        Term::DownPayment,
        Term::TradeIn,
        Term::Model,
        Term::Color,
        Term::Interior,
        Term::Warranty,
        Term::Service,
        Term::Accessories,
    ];
    pub const CONTINUOUS: [Term; 4] = [Term::Price, Term::Delivery, Term::DownPayment, Term::TradeIn];
    pub const CATEGORICAL: [Term; 5] = [Term::Model, Term::Color, Term::Interior, Term::Warranty, Term::Service];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn schema(self) -> &'static TermSchema {
        &SCHEMA[self.index()]
    }

    pub fn name(self) -> &'static str {
        self.schema().name
    }

    pub fn kind(self) -> TermKind {
        self.schema().kind
    }

    pub fn options(self) -> &'static [&'static str] {
        self.schema().options
    }

    /// Number of feature components the term occupies.
    pub fn width(self) -> usize {
        match self.kind() {
            TermKind::Categorical => self.options().len(),
            _ => 1,
        }
    }

    /// Slot in `Contract::continuous` (continuous terms only).
    pub fn continuous_slot(self) -> Option<usize> {
        (self.kind() == TermKind::Continuous).then(|| self.index())
    }

    /// Slot in `Contract::choices` (categorical terms only).
    pub fn choice_slot(self) -> Option<usize> {
        (self.kind() == TermKind::Categorical).then(|| self.index() - 4)
    }

    pub fn range(self, role: Role) -> Option<Interval> {
        let s = self.schema();
        match role {
            Role::Buyer => s.buyer_range,
            Role::Seller => s.seller_range,
        }
    }

    pub fn option_index(self, option: &str) -> Option<usize> {
        self.options().iter().position(|o| *o == option)
    }

    /// Case-insensitive option lookup returning the canonical index.
    pub fn option_index_loose(self, option: &str) -> Option<usize> {
        let needle = option.trim();
        self.options().iter().position(|o| o.eq_ignore_ascii_case(needle))
    }

    pub fn from_name(name: &str) -> Option<Term> {
        Term::ALL.iter().copied().find(|t| t.name() == name)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Intersection of the buyer and seller ranges of a continuous term.
pub fn joint_bounds(term: Term) -> Result<Interval, DomainError> {
    let s = term.schema();
    match (s.buyer_range, s.seller_range) {
        (Some(b), Some(sr)) => b.intersect(&sr).ok_or(DomainError::EmptyIntersection(term)),
        _ => Err(DomainError::NotContinuous(term)),
    }
}

/// Value assigned to one term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TermValue {
    Number(f64),
    Choice(u8),
    Flag(bool),
}

impl TermValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            TermValue::Number(v) => Some(*v),
            _ => None,
        }
    }

    fn to_json(self, term: Term) -> serde_json::Value {
        match self {
            TermValue::Number(v) => serde_json::json!(v),
            TermValue::Choice(i) => serde_json::Value::String(term.options()[i as usize].to_string()),
            TermValue::Flag(b) => serde_json::Value::Bool(b),
        }
    }

    /// Strict conversion from a JSON value in canonical form.
    pub fn from_json(term: Term, v: &serde_json::Value) -> Result<TermValue, DomainError> {
        match (term.kind(), v) {
            (TermKind::Continuous, serde_json::Value::Number(n)) => {
                n.as_f64().map(TermValue::Number).ok_or(DomainError::KindMismatch(term))
            }
            (TermKind::Categorical, serde_json::Value::String(s)) => term
                .option_index(s)
                .map(|i| TermValue::Choice(i as u8))
                .ok_or_else(|| DomainError::UnknownOption { term, option: s.clone() }),
            (TermKind::Binary, serde_json::Value::Bool(b)) => Ok(TermValue::Flag(*b)),
            _ => Err(DomainError::KindMismatch(term)),
        }
    }

    pub fn display(&self, term: Term) -> String {
        match self {
            TermValue::Number(v) => format_number(*v),
            TermValue::Choice(i) => term.options()[*i as usize].to_string(),
            TermValue::Flag(b) => b.to_string(),
        }
    }
}

/// Shortest decimal rendering with at most two fractional digits.
pub fn format_number(v: f64) -> String {
    let r = (v * 100.0).round() / 100.0;
    let s = format!("{r:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// Possibly partial assignment of terms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartialOffer {
    assignments: BTreeMap<Term, TermValue>,
}

impl PartialOffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, term: Term, value: TermValue) -> Self {
        self.set(term, value);
        self
    }

    pub fn set(&mut self, term: Term, value: TermValue) {
        self.assignments.insert(term, value);
    }

    pub fn get(&self, term: Term) -> Option<TermValue> {
        self.assignments.get(&term).copied()
    }

    pub fn remove(&mut self, term: Term) -> Option<TermValue> {
        self.assignments.remove(&term)
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_complete(&self) -> bool {
        self.assignments.len() == N_TERMS
    }

    pub fn iter(&self) -> impl Iterator<Item = (Term, TermValue)> + '_ {
        self.assignments.iter().map(|(t, v)| (*t, *v))
    }

    pub fn terms(&self) -> impl Iterator<Item = Term> + '_ {
        self.assignments.keys().copied()
    }

    /// Checks the offer invariants against the offering role's ranges.
    pub fn validate(&self, role: Role) -> Result<(), DomainError> {
        for (term, value) in self.iter() {
            match (term.kind(), value) {
                (TermKind::Continuous, TermValue::Number(v)) => {
                    let r = term.range(role).expect("continuous range");
                    if !r.contains(v) {
                        return Err(DomainError::ValueOutOfRange { term, value: v, lo: r.lo, hi: r.hi });
                    }
                }
                (TermKind::Categorical, TermValue::Choice(i)) if (i as usize) < term.options().len() => {}
                (TermKind::Binary, TermValue::Flag(_)) => {}
                _ => return Err(DomainError::KindMismatch(term)),
            }
        }
        Ok(())
    }

    /// Compact single-line rendering used in prompts and logs.
    pub fn describe(&self) -> String {
        self.iter()
            .map(|(t, v)| describe_term(t, v))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

fn describe_term(term: Term, v: TermValue) -> String {
    match (term, v) {
        (Term::Price, TermValue::Number(x)) => format!("price ${}k", format_number(x)),
        (Term::TradeIn, TermValue::Number(x)) => format!("trade-in ${}k", format_number(x)),
        (Term::Delivery, TermValue::Number(x)) => format!("delivery {} days", format_number(x)),
        (Term::DownPayment, TermValue::Number(x)) => format!("down payment {}%", format_number(x)),
        (Term::Accessories, TermValue::Flag(b)) => {
            if b {
                "accessories included".to_string()
            } else {
                "no accessories".to_string()
            }
        }
        (t, v) => format!("{} {}", t.name(), v.display(t)),
    }
}

impl Serialize for PartialOffer {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.assignments.len()))?;
        for (t, v) in &self.assignments {
            map.serialize_entry(t.name(), &v.to_json(*t))?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for PartialOffer {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct OfferVisitor;
        impl<'de> Visitor<'de> for OfferVisitor {
            type Value = PartialOffer;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map of term names to values")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<PartialOffer, A::Error> {
                let mut offer = PartialOffer::new();
                while let Some((k, v)) = access.next_entry::<String, serde_json::Value>()? {
                    let term = Term::from_name(&k).ok_or_else(|| de::Error::custom(DomainError::UnknownTerm(k.clone())))?;
                    let value = TermValue::from_json(term, &v).map_err(de::Error::custom)?;
                    offer.set(term, value);
                }
                Ok(offer)
            }
        }
        deserializer.deserialize_map(OfferVisitor)
    }
}

/// Complete assignment of all ten terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contract {
    /// price, delivery, down_payment, trade_in
    pub continuous: [f64; 4],
    /// option index for model, color, interior, warranty, service
    pub choices: [u8; 5],
    pub accessories: bool,
}

impl Contract {
    pub fn get(&self, term: Term) -> TermValue {
        match term.kind() {
            TermKind::Continuous => TermValue::Number(self.continuous[term.index()]),
            TermKind::Categorical => TermValue::Choice(self.choices[term.index() - 4]),
            TermKind::Binary => TermValue::Flag(self.accessories),
        }
    }

    pub fn set(&mut self, term: Term, value: TermValue) -> Result<(), DomainError> {
        match (term.kind(), value) {
            (TermKind::Continuous, TermValue::Number(v)) => self.continuous[term.index()] = v,
            (TermKind::Categorical, TermValue::Choice(i)) if (i as usize) < term.options().len() => {
                self.choices[term.index() - 4] = i
            }
            (TermKind::Binary, TermValue::Flag(b)) => self.accessories = b,
            _ => return Err(DomainError::KindMismatch(term)),
        }
        Ok(())
    }

    pub fn price(&self) -> f64 {
        self.continuous[0]
    }

    pub fn choice_name(&self, term: Term) -> &'static str {
        let slot = term.choice_slot().expect("categorical term");
        term.options()[self.choices[slot] as usize]
    }

    pub fn from_offer(offer: &PartialOffer) -> Result<Contract, DomainError> {
        let mut c = Contract { continuous: [0.0; 4], choices: [0; 5], accessories: false };
        for term in Term::ALL {
            let v = offer.get(term).ok_or(DomainError::Incomplete(term))?;
            c.set(term, v)?;
        }
        Ok(c)
    }

    pub fn to_offer(&self) -> PartialOffer {
        let mut o = PartialOffer::new();
        for term in Term::ALL {
            o.set(term, self.get(term));
        }
        o
    }

    /// True when every continuous value lies inside both roles' ranges.
    pub fn within_joint_bounds(&self) -> bool {
        Term::CONTINUOUS.iter().all(|t| {
            let j = joint_bounds(*t).expect("continuous");
            j.contains(self.continuous[t.index()])
        })
    }

    pub fn within_role_range(&self, role: Role) -> bool {
        Term::CONTINUOUS
            .iter()
            .all(|t| t.range(role).expect("continuous").contains(self.continuous[t.index()]))
    }

    pub fn describe(&self) -> String {
        self.to_offer().describe()
    }
}

impl Serialize for Contract {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_offer().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Contract {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let offer = PartialOffer::deserialize(deserializer)?;
        Contract::from_offer(&offer).map_err(de::Error::custom)
    }
}

/// Either a complete contract or a partial offer, after autofill.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "terms", rename_all = "snake_case")]
pub enum ResolvedOffer {
    Complete(Contract),
    Partial(PartialOffer),
}

impl ResolvedOffer {
    pub fn as_contract(&self) -> Option<&Contract> {
        match self {
            ResolvedOffer::Complete(c) => Some(c),
            ResolvedOffer::Partial(_) => None,
        }
    }

    pub fn get(&self, term: Term) -> Option<TermValue> {
        match self {
            ResolvedOffer::Complete(c) => Some(c.get(term)),
            ResolvedOffer::Partial(p) => p.get(term),
        }
    }
}

/// Fills the terms `new` leaves unset from the last complete contract.
pub fn merge_autofill(new: &PartialOffer, last_complete: Option<&Contract>) -> ResolvedOffer {
    match last_complete {
        Some(last) => {
            let mut merged = *last;
            for (term, value) in new.iter() {
                // kinds were validated when the partial offer was built
                let _ = merged.set(term, value);
            }
            ResolvedOffer::Complete(merged)
        }
        None => match Contract::from_offer(new) {
            Ok(c) => ResolvedOffer::Complete(c),
            Err(_) => ResolvedOffer::Partial(new.clone()),
        },
    }
}

/// Fixed-layout feature vector φ(x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; DIM]);

impl FeatureVector {
    pub fn zeros() -> Self {
        FeatureVector([0.0; DIM])
    }

    pub fn dot(&self, w: &[f64; DIM]) -> f64 {
        self.0.iter().zip(w.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampEvent {
    pub term: Term,
    pub role: Role,
    pub value: f64,
    pub clamped_to: f64,
}

/// Normalized position of `value` within the role's range (unclamped).
pub fn normalize_value(term: Term, role: Role, value: f64) -> f64 {
    let r = term.range(role).expect("continuous term");
    (value - r.lo) / r.width()
}

/// Inverse of [`normalize_value`].
pub fn denormalize_value(term: Term, role: Role, norm: f64) -> f64 {
    let r = term.range(role).expect("continuous term");
    r.lo + norm * r.width()
}

/// Encodes a contract in the role's own normalization, failing on
/// continuous values outside that role's range.
pub fn encode(contract: &Contract, role: Role) -> Result<FeatureVector, DomainError> {
    for t in Term::CONTINUOUS {
        let r = t.range(role).expect("continuous");
        let v = contract.continuous[t.index()];
        if !r.contains(v) {
            return Err(DomainError::ValueOutOfRange { term: t, value: v, lo: r.lo, hi: r.hi });
        }
    }
    Ok(encode_clamped(contract, role).0)
}

/// Encodes with continuous components clamped to [0,1]; reports clamps.
pub fn encode_clamped(contract: &Contract, role: Role) -> (FeatureVector, Vec<ClampEvent>) {
    let mut events = Vec::new();
    let fv = encode_with(contract, role, |term, value, norm| {
        let c = norm.clamp(0.0, 1.0);
        if c != norm {
            events.push(ClampEvent { term, role, value, clamped_to: denormalize_value(term, role, c) });
        }
        c
    });
    (fv, events)
}

/// Allocation-free clamped encoding.
pub fn encode_fast(contract: &Contract, role: Role) -> FeatureVector {
    encode_with(contract, role, |_, _, norm| norm.clamp(0.0, 1.0))
}

fn encode_with(contract: &Contract, role: Role, mut clamp: impl FnMut(Term, f64, f64) -> f64) -> FeatureVector {
    let mut out = [0.0; DIM];
    for t in Term::CONTINUOUS {
        let v = contract.continuous[t.index()];
        out[t.index()] = clamp(t, v, normalize_value(t, role, v));
    }
    for (slot, t) in Term::CATEGORICAL.iter().enumerate() {
        out[t.schema().offset + contract.choices[slot] as usize] = 1.0;
    }
    out[Term::Accessories.schema().offset] = if contract.accessories { 1.0 } else { 0.0 };
    FeatureVector(out)
}

/// One component of the feature vector: a continuous term, a categorical
/// option, or the accessories flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Component {
    pub term: Term,
    pub option: Option<u8>,
}

impl Component {
    pub fn from_index(i: usize) -> Component {
        assert!(i < DIM, "component index {i} out of range");
        let term = Term::ALL
            .iter()
            .rev()
            .copied()
            .find(|t| t.schema().offset <= i)
            .expect("offset 0 exists");
        let option = (term.kind() == TermKind::Categorical).then(|| (i - term.schema().offset) as u8);
        Component { term, option }
    }

    pub fn index(&self) -> usize {
        self.term.schema().offset + self.option.unwrap_or(0) as usize
    }

    /// Canonical feature identifier: `price`, `model:Sedan`, `accessories`.
    pub fn id(&self) -> String {
        match self.option {
            Some(o) => format!("{}:{}", self.term.name(), self.term.options()[o as usize]),
            None => self.term.name().to_string(),
        }
    }

    pub fn parse(id: &str) -> Result<Component, DomainError> {
        let unknown = || DomainError::UnknownFeature(id.to_string());
        match id.split_once(':') {
            Some((t, o)) => {
                let term = Term::from_name(t.trim()).ok_or_else(unknown)?;
                if term.kind() != TermKind::Categorical {
                    return Err(unknown());
                }
                let idx = term.option_index_loose(o).ok_or_else(unknown)?;
                Ok(Component { term, option: Some(idx as u8) })
            }
            None => {
                let term = Term::from_name(id.trim()).ok_or_else(unknown)?;
                if term.kind() == TermKind::Categorical {
                    return Err(unknown());
                }
                Ok(Component { term, option: None })
            }
        }
    }

    pub fn all() -> impl Iterator<Item = Component> {
        (0..DIM).map(Component::from_index)
    }

    /// Normalized value of this component in an offer, when the term is set.
    pub fn value_in(&self, offer: &ResolvedOffer, role: Role) -> Option<f64> {
        let v = offer.get(self.term)?;
        Some(match v {
            TermValue::Number(x) => normalize_value(self.term, role, x).clamp(0.0, 1.0),
            TermValue::Choice(c) => {
                if Some(c) == self.option {
                    1.0
                } else {
                    0.0
                }
            }
            TermValue::Flag(b) => {
                if b {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl Serialize for Component {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.id())
    }
}

impl<'de> Deserialize<'de> for Component {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Component::parse(&s).map_err(de::Error::custom)
    }
}

/// Vocabulary of all canonical feature identifiers, in layout order.
pub fn feature_vocabulary() -> Vec<String> {
    Component::all().map(|c| c.id()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_contract() -> Contract {
        Contract { continuous: [38.0, 14.0, 20.0, 8.0], choices: [0, 2, 1, 1, 1], accessories: true }
    }

    #[test]
    fn schema_matches_term_table() {
        assert_eq!(Term::ALL.len(), 10);
        let widths: usize = Term::ALL.iter().map(|t| t.width()).sum();
        assert_eq!(widths, DIM);
        assert_eq!(Term::Price.range(Role::Buyer), Some(Interval::new(20.0, 45.0)));
        assert_eq!(Term::Price.range(Role::Seller), Some(Interval::new(25.0, 55.0)));
        assert_eq!(Term::Delivery.range(Role::Seller), Some(Interval::new(7.0, 60.0)));
        assert_eq!(Term::DownPayment.range(Role::Buyer), Some(Interval::new(0.0, 30.0)));
        assert_eq!(Term::TradeIn.range(Role::Seller), Some(Interval::new(0.0, 10.0)));
        assert_eq!(Term::Color.options(), &["White", "Black", "Silver", "Blue", "Red"]);
        assert_eq!(Term::Warranty.options(), &["none", "basic", "extended"]);
        assert_eq!(Term::Service.options(), &["none", "annual", "comprehensive"]);
        for t in Term::ALL {
            let mut off = 0;
            for u in Term::ALL {
                if u == t {
                    break;
                }
                off += u.width();
            }
            assert_eq!(t.schema().offset, off, "{t}");
        }
    }

    #[test]
    fn joint_bounds_examples() {
        assert_eq!(joint_bounds(Term::Price).unwrap(), Interval::new(25.0, 45.0));
        assert_eq!(joint_bounds(Term::Delivery).unwrap(), Interval::new(7.0, 30.0));
        assert_eq!(joint_bounds(Term::DownPayment).unwrap(), Interval::new(15.0, 30.0));
        assert_eq!(joint_bounds(Term::TradeIn).unwrap(), Interval::new(5.0, 10.0));
        assert_eq!(joint_bounds(Term::Model), Err(DomainError::NotContinuous(Term::Model)));
        assert!(Interval::new(0.0, 1.0).intersect(&Interval::new(2.0, 3.0)).is_none());
    }

    #[test]
    fn buyer_price_normalization() {
        let mut c = sample_contract();
        for (price, expect) in [(20.0, 0.0), (32.5, 0.5), (45.0, 1.0)] {
            c.continuous[0] = price;
            let fv = encode(&c, Role::Buyer).unwrap();
            assert!((fv.0[0] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn one_hot_blocks() {
        let c = sample_contract();
        let fv = encode(&c, Role::Buyer).unwrap();
        assert_eq!(&fv.0[4..7], &[1.0, 0.0, 0.0]);
        assert_eq!(&fv.0[7..12], &[0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(fv.0[21], 1.0);
        for t in Term::CATEGORICAL {
            let o = t.schema().offset;
            let s: f64 = fv.0[o..o + t.width()].iter().sum();
            assert_eq!(s, 1.0);
        }
    }

    #[test]
    fn strict_encoding_rejects_out_of_range() {
        let mut c = sample_contract();
        c.continuous[0] = 22.0; // below seller minimum
        assert!(matches!(encode(&c, Role::Seller), Err(DomainError::ValueOutOfRange { term: Term::Price, .. })));
        let (fv, events) = encode_clamped(&c, Role::Seller);
        assert_eq!(fv.0[0], 0.0);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].clamped_to, 25.0);
    }

    #[test]
    fn autofill_cases() {
        let last = sample_contract();
        let new = PartialOffer::new().with(Term::Price, TermValue::Number(35.0));
        let merged = merge_autofill(&new, Some(&last));
        let c = merged.as_contract().unwrap();
        assert_eq!(c.price(), 35.0);
        assert_eq!(c.choices, last.choices);
        assert_eq!(c.continuous[1..], last.continuous[1..]);

        assert_eq!(merge_autofill(&PartialOffer::new(), Some(&last)), ResolvedOffer::Complete(last));

        let truck = PartialOffer::new().with(Term::Model, TermValue::Choice(2));
        assert_eq!(merge_autofill(&truck, None), ResolvedOffer::Partial(truck.clone()));
    }

    #[test]
    fn offer_serde_uses_canonical_names() {
        let c = sample_contract();
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.contains("\"model\":\"Sedan\""));
        assert!(json.contains("\"color\":\"Silver\""));
        assert!(json.contains("\"accessories\":true"));
        let back: Contract = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
        let bad = r#"{"model":"Tank"}"#;
        assert!(serde_json::from_str::<PartialOffer>(bad).is_err());
    }

    #[test]
    fn partial_offer_validation() {
        let ok = PartialOffer::new().with(Term::Price, TermValue::Number(22.0));
        assert!(ok.validate(Role::Buyer).is_ok());
        assert!(ok.validate(Role::Seller).is_err());
        let wrong = PartialOffer::new().with(Term::Model, TermValue::Flag(true));
        assert_eq!(wrong.validate(Role::Buyer), Err(DomainError::KindMismatch(Term::Model)));
    }

    #[test]
    fn component_ids_roundtrip() {
        let vocab = feature_vocabulary();
        assert_eq!(vocab.len(), DIM);
        assert_eq!(vocab[0], "price");
        assert_eq!(vocab[4], "model:Sedan");
        assert_eq!(vocab[21], "accessories");
        for (i, id) in vocab.iter().enumerate() {
            let c = Component::parse(id).unwrap();
            assert_eq!(c.index(), i);
        }
        assert_eq!(Component::parse("model:suv").unwrap().index(), 5);
        assert!(Component::parse("model").is_err());
        assert!(Component::parse("price:high").is_err());
    }

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(35.0), "35");
        assert_eq!(format_number(32.5), "32.5");
        assert_eq!(format_number(7.125), "7.13");
        assert_eq!(format_number(-0.001), "0");
    }
}
