//! Counterparty beliefs read from reasoning traces, and their scoring:
//! signed accuracy against the opponent's top-k weight components and the
//! alignment of offered values with believed preferences.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::backend::{BackendError, ChatBackend};
use crate::domain::{feature_vocabulary, Component, ResolvedOffer, Role, Term, TermKind, DIM};
use crate::prompts::ChatMessage;
use crate::utility::UtilityProfile;

/// Extraction prompt template, versioned alongside the transcripts that
/// depend on it.
pub const EXTRACTOR_PROMPT_V1: &str = include_str!("../prompts/belief_extractor_v1.txt");
pub const EXTRACTOR_VERSION: &str = "belief_extractor_v1";
/// Prefix of the machine-readable belief line inside a reasoning trace.
pub const SIDECAR_PREFIX: &str = "BELIEFS:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeliefSource {
    Annotation,
    Extractor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Belief {
    pub feature: Component,
    /// +1 or -1
    pub direction: i8,
    pub turn_index: usize,
    pub source: BeliefSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorBackend {
    #[default]
    Annotation,
    Extractor,
}

impl ExtractorBackend {
    pub fn as_str(self) -> &'static str {
        match self {
            ExtractorBackend::Annotation => "annotation",
            ExtractorBackend::Extractor => "extractor",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "annotation" => Some(ExtractorBackend::Annotation),
            "extractor" => Some(ExtractorBackend::Extractor),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("belief extractor unavailable: {0}")]
pub struct ExtractorUnavailable(pub BackendError);

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Extraction {
    pub beliefs: Vec<Belief>,
    /// Items naming features outside the vocabulary.
    pub dropped: usize,
}

/// `BELIEFS: [{"feature": "price", "direction": -1}, ...]`
pub fn format_sidecar(items: &[(Component, i8)]) -> String {
    let list: Vec<Value> = items
        .iter()
        .map(|(c, d)| serde_json::json!({"feature": c.id(), "direction": d}))
        .collect();
    format!("{SIDECAR_PREFIX} {}", Value::Array(list))
}

/// Parses the last sidecar line of a trace; `None` when there is none.
pub fn parse_sidecar(think: &str) -> Option<(Vec<(Component, i8)>, usize)> {
    let line = think.lines().rev().find_map(|l| l.trim().strip_prefix(SIDECAR_PREFIX))?;
    let v: Value = serde_json::from_str(line.trim()).ok()?;
    Some(belief_items(&v))
}

fn belief_items(v: &Value) -> (Vec<(Component, i8)>, usize) {
    let mut out = Vec::new();
    let mut dropped = 0;
    for item in v.as_array().map(Vec::as_slice).unwrap_or_default() {
        let feature = item.get("feature").and_then(Value::as_str).and_then(|f| Component::parse(f).ok());
        let direction = item.get("direction").and_then(Value::as_f64).filter(|d| *d != 0.0);
        match (feature, direction) {
            (Some(c), Some(d)) => out.push((c, if d > 0.0 { 1 } else { -1 })),
            _ => dropped += 1,
        }
    }
    (out, dropped)
}

/// Chat messages asking the extractor to list beliefs held by `role`.
pub fn extraction_messages(role: Role, think: &str) -> Vec<ChatMessage> {
    let prompt = EXTRACTOR_PROMPT_V1
        .replace("{ROLE}", role.upper())
        .replace("{OPPONENT}", role.opponent().upper())
        .replace("{VOCABULARY}", &feature_vocabulary().join("\n"))
        .replace("{THINK}", think.trim());
    vec![ChatMessage::user(prompt)]
}

/// Reads the last JSON list in an extractor reply.
pub fn parse_extractor_reply(content: &str) -> Option<(Vec<(Component, i8)>, usize)> {
    let mut found = None;
    let mut i = 0;
    while let Some(off) = content[i..].find('[') {
        let start = i + off;
        let mut stream = serde_json::Deserializer::from_str(&content[start..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(v @ Value::Array(_))) => {
                found = Some(v);
                i = start + stream.byte_offset();
            }
            _ => i = start + 1,
        }
    }
    found.map(|v| belief_items(&v))
}

/// Beliefs of `role` about its opponent for one turn.
pub fn extract_beliefs(
    think: &str,
    role: Role,
    turn_index: usize,
    kind: ExtractorBackend,
    chat: Option<&dyn ChatBackend>,
) -> Result<Extraction, ExtractorUnavailable> {
    if think.trim().is_empty() {
        return Ok(Extraction::default());
    }
    let (items, dropped, source) = match kind {
        ExtractorBackend::Annotation => {
            let (items, dropped) = parse_sidecar(think).unwrap_or_default();
            (items, dropped, BeliefSource::Annotation)
        }
        ExtractorBackend::Extractor => {
            let chat = chat.ok_or_else(|| ExtractorUnavailable(BackendError::Transport("no backend".into())))?;
            let reply = chat.complete(&extraction_messages(role, think)).map_err(ExtractorUnavailable)?;
            let (items, dropped) = parse_extractor_reply(&reply.content)
                .ok_or_else(|| ExtractorUnavailable(BackendError::Malformed("no JSON list".into())))?;
            (items, dropped, BeliefSource::Extractor)
        }
    };
    let beliefs = items
        .into_iter()
        .map(|(feature, direction)| Belief { feature, direction, turn_index, source })
        .collect();
    Ok(Extraction { beliefs, dropped })
}

const UP_WORDS: &[&str] = &[
    "higher", "increase", "increased", "more", "raise", "raised", "later", "longer", "bigger", "larger", "high", "up",
];
const DOWN_WORDS: &[&str] = &[
    "lower", "decrease", "decreased", "less", "reduce", "reduced", "faster", "sooner", "earlier", "cheaper", "smaller",
    "low", "quick", "quicker", "down",
];
const NEGATIVE_WORDS: &[&str] = &["dislike", "dislikes", "don't want", "doesn't want", "do not want", "avoid", "hate", "hates", "against", "not interested"];
const OPPONENT_WORDS: &[&str] = &["they", "them", "their", "theirs", "opponent", "other side", "other party", "counterparty"];

fn term_keywords(term: Term) -> &'static [&'static str] {
    match term {
        Term::Price => &["price", "cost"],
        Term::Delivery => &["delivery", "deliver"],
        Term::DownPayment => &["down payment", "down-payment", "downpayment"],
        Term::TradeIn => &["trade-in", "trade in", "tradein"],
        Term::Accessories => &["accessories", "accessory"],
        _ => &[],
    }
}

/// Byte offsets of whole-word occurrences of `word` (plural `s` allowed).
fn word_hits(text: &str, word: &str) -> Vec<usize> {
    let bytes = text.as_bytes();
    let mut hits = Vec::new();
    let mut from = 0;
    while let Some(off) = text[from..].find(word) {
        let start = from + off;
        let mut end = start + word.len();
        if end < bytes.len() && bytes[end] == b's' {
            end += 1;
        }
        let before_ok = start == 0 || !bytes[start - 1].is_ascii_alphanumeric();
        let after_ok = end >= bytes.len() || !(bytes[end].is_ascii_alphanumeric() || bytes[end] == b'-');
        if before_ok && after_ok {
            hits.push(start);
        }
        from = start + word.len();
    }
    hits
}

fn contains_word(text: &str, words: &[&str]) -> bool {
    words.iter().any(|w| !word_hits(text, w).is_empty())
}

fn nearest_direction(clause: &str, at: usize) -> Option<i8> {
    let mut best: Option<(usize, i8)> = None;
    for (words, d) in [(UP_WORDS, 1i8), (DOWN_WORDS, -1i8)] {
        for w in words {
            for h in word_hits(clause, w) {
                let dist = h.abs_diff(at);
                if best.is_none_or(|(b, _)| dist < b) {
                    best = Some((dist, d));
                }
            }
        }
    }
    best.map(|(_, d)| d)
}

fn clauses(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut out = Vec::new();
    for sentence in lower.split(['.', '!', '?', '\n', ';']) {
        let mut rest = sentence.to_string();
        for sep in [" but ", " while ", " whereas ", " however "] {
            rest = rest.replace(sep, "|");
        }
        out.extend(rest.split('|').map(|c| c.trim().to_string()).filter(|c| !c.is_empty()));
    }
    out
}

/// Keyword reading of a reasoning trace written by `role`: clauses that
/// refer to the opponent are scanned for term and option mentions with
/// direction words. Later mentions override earlier ones.
pub fn keyword_beliefs(text: &str, role: Role) -> Vec<(Component, i8)> {
    let opponent_name = role.opponent().as_str();
    let mut found: Vec<(Component, i8)> = Vec::new();
    let mut push = |c: Component, d: i8| {
        found.retain(|(x, _)| *x != c);
        found.push((c, d));
    };
    for clause in clauses(text) {
        if !(contains_word(&clause, OPPONENT_WORDS) || contains_word(&clause, &[opponent_name])) {
            continue;
        }
        let negative = contains_word(&clause, NEGATIVE_WORDS);
        // keep "down" in "down payment" from reading as a direction
        let masked = clause.replace("down payment", "downxpayment").replace("down-payment", "downxpayment");
        for term in Term::CONTINUOUS {
            let hits: Vec<usize> = term_keywords(term).iter().flat_map(|k| word_hits(&clause, k)).collect();
            if let Some(&at) = hits.first() {
                if let Some(d) = nearest_direction(&masked, at) {
                    push(Component { term, option: None }, d);
                }
            }
        }
        if !word_hits(&clause, "accessories").is_empty() || !word_hits(&clause, "accessory").is_empty() {
            let excluded = ["no accessories", "without accessories", "exclude", "excluded", "excluding", "skip", "drop"]
                .iter()
                .any(|w| clause.contains(w));
            let included = ["include", "included", "including", "with accessories", "want accessories", "add"]
                .iter()
                .any(|w| clause.contains(w));
            if excluded || included {
                push(Component { term: Term::Accessories, option: None }, if excluded { -1 } else { 1 });
            }
        }
        for term in Term::CATEGORICAL {
            for (i, opt) in term.options().iter().enumerate() {
                let hit = if *opt == "none" {
                    let noun = if term == Term::Warranty { "warranty" } else { "service" };
                    clause.contains(&format!("no {noun}")) || clause.contains(&format!("without {noun}"))
                } else {
                    !word_hits(&clause, &opt.to_lowercase()).is_empty()
                };
                if hit {
                    push(Component { term, option: Some(i as u8) }, if negative { -1 } else { 1 });
                }
            }
        }
    }
    found
}

/// Latest direction per feature over a belief sequence.
pub fn latest_directions(beliefs: &[Belief]) -> BTreeMap<Component, i8> {
    let mut out = BTreeMap::new();
    for b in beliefs {
        out.insert(b.feature, b.direction);
    }
    out
}

/// The k components with the largest |weight| and their signs; ties keep
/// layout order.
pub fn top_k_components(profile: &UtilityProfile, k: usize) -> Vec<(Component, i8)> {
    let mut idx: Vec<usize> = (0..DIM).filter(|i| profile.weights[*i] != 0.0).collect();
    idx.sort_by(|a, b| profile.weights[*b].abs().total_cmp(&profile.weights[*a].abs()));
    idx.into_iter()
        .take(k)
        .map(|i| (Component::from_index(i), if profile.weights[i] > 0.0 { 1 } else { -1 }))
        .collect()
}

/// Fraction of distinct cumulative beliefs (latest direction wins) that
/// name one of the opponent's top-k components with the right sign.
/// `None` when there are no beliefs.
pub fn signed_accuracy_at_k(cumulative: &[Belief], opponent: &UtilityProfile, k: usize) -> Option<f64> {
    assert!(k >= 1, "k must be positive");
    let latest = latest_directions(cumulative);
    if latest.is_empty() {
        return None;
    }
    let truth = top_k_components(opponent, k);
    let correct = latest.iter().filter(|(c, d)| truth.iter().any(|(t, s)| t == *c && s == *d)).count();
    Some(correct as f64 / latest.len() as f64)
}

/// a = d · (v̂ − 0.5)
pub fn alignment_score(direction: i8, offered_norm: f64) -> f64 {
    f64::from(direction) * (offered_norm - 0.5)
}

/// Mean alignment over this turn's beliefs whose feature the offer sets,
/// with values normalized in the offering role's encoding.
pub fn turn_alignment(beliefs: &[Belief], offer: &ResolvedOffer, role: Role) -> Option<f64> {
    let scores: Vec<f64> = beliefs
        .iter()
        .filter_map(|b| b.feature.value_in(offer, role).map(|v| alignment_score(b.direction, v)))
        .collect();
    (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Natural-language phrase for a belief, as written in scripted traces.
pub fn belief_phrase(c: Component, d: i8) -> String {
    let up = d > 0;
    match (c.term, c.option) {
        (Term::Price, _) => format!("They want a {} price.", if up { "higher" } else { "lower" }),
        (Term::Delivery, _) => format!("They want {} delivery.", if up { "later" } else { "faster" }),
        (Term::DownPayment, _) => format!("They want a {} down payment.", if up { "higher" } else { "lower" }),
        (Term::TradeIn, _) => format!("They want a {} trade-in value.", if up { "higher" } else { "lower" }),
        (Term::Accessories, _) => {
            if up {
                "They want accessories included.".into()
            } else {
                "They want no accessories.".into()
            }
        }
        (t, Some(o)) if t.kind() == TermKind::Categorical => {
            let name = t.options()[o as usize];
            let label = if name == "none" { format!("no {}", t.name()) } else { format!("{name} {}", t.name()) };
            if up {
                format!("They prefer {label}.")
            } else {
                format!("They dislike {label}.")
            }
        }
        _ => String::new(),
    }
}
