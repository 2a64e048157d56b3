//! Turns raw model output into dialogue, reasoning trace and an action.

use serde_json::Value;
use thiserror::Error;

use crate::beliefs::parse_sidecar;
use crate::domain::{Component, PartialOffer, Term, TermKind, TermValue};
use crate::protocol::{Action, ActionKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseFailure {
    #[error("no JSON object in response")]
    NoJson,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResponse {
    pub dialogue: String,
    pub think: String,
    pub action: Action,
    /// Machine-readable beliefs found in the trace, if any.
    pub belief_annotations: Option<Vec<(Component, i8)>>,
    pub parse_events: Vec<String>,
}

/// Splits `<think>` segments out of `raw`. A lone closing tag marks
/// everything before it as reasoning.
fn split_think(raw: &str) -> (String, String) {
    let mut think = Vec::new();
    let mut rest = String::with_capacity(raw.len());
    let mut s = raw;
    if !s.contains("<think>") {
        if let Some(end) = s.find("</think>") {
            think.push(s[..end].trim().to_string());
            s = &s[end + "</think>".len()..];
        }
    }
    while let Some(open) = s.find("<think>") {
        rest.push_str(&s[..open]);
        let body = &s[open + "<think>".len()..];
        match body.find("</think>") {
            Some(close) => {
                think.push(body[..close].trim().to_string());
                s = &body[close + "</think>".len()..];
            }
            None => {
                think.push(body.trim().to_string());
                s = "";
            }
        }
    }
    rest.push_str(s);
    (think.join("\n"), rest)
}

/// Last top-level JSON object in `text`: (start offset, value).
fn last_object(text: &str) -> Option<(usize, Value)> {
    let mut found = None;
    let mut i = 0;
    while let Some(off) = text[i..].find('{') {
        let start = i + off;
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(v @ Value::Object(_))) => {
                i = start + stream.byte_offset();
                found = Some((start, v));
            }
            _ => i = start + 1,
        }
    }
    found
}

fn canonical_term(name: &str) -> Option<Term> {
    let key: String = name
        .trim()
        .to_lowercase()
        .chars()
        .map(|c| if c == ' ' || c == '-' { '_' } else { c })
        .collect();
    if let Some(t) = Term::from_name(&key) {
        return Some(t);
    }
    Some(match key.as_str() {
        "cost" | "car_price" | "purchase_price" => Term::Price,
        "delivery_day" | "delivery_days" | "delivery_time" | "delivery_date" => Term::Delivery,
        "down" | "downpayment" | "down_payment_percent" | "down_payment_pct" => Term::DownPayment,
        "tradein" | "trade" | "trade_in_value" | "tradein_value" => Term::TradeIn,
        "car_model" | "vehicle" | "vehicle_type" | "body_type" => Term::Model,
        "colour" | "paint" | "exterior_color" => Term::Color,
        "interior_trim" | "trim" => Term::Interior,
        "warranty_type" | "warranty_plan" => Term::Warranty,
        "service_plan" | "service_package" | "maintenance" => Term::Service,
        "accessory" | "has_accessories" | "accessories_included" | "accessory_package" => Term::Accessories,
        _ => return None,
    })
}

fn number_from(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => {
            // "$36,500", "35k", "14 days"
            let cleaned: String = s.chars().filter(|c| c.is_ascii_digit() || *c == '.' || *c == '-').collect();
            cleaned.parse().ok()
        }
        _ => None,
    }
    .filter(|x| x.is_finite())
}

/// Converts a JSON value for `term`, coercing common model conventions.
pub fn coerce_value(term: Term, v: &Value) -> Result<(TermValue, Option<String>), String> {
    match term.kind() {
        TermKind::Continuous => {
            let x = number_from(v).ok_or_else(|| format!("{term}: not a number: {v}"))?;
            if matches!(term, Term::Price | Term::TradeIn) && x > 1000.0 {
                Ok((TermValue::Number(x / 1000.0), Some(format!("{term}: {x} read as ${}k", x / 1000.0))))
            } else {
                Ok((TermValue::Number(x), None))
            }
        }
        TermKind::Categorical => {
            let s = v.as_str().ok_or_else(|| format!("{term}: not a string: {v}"))?;
            let i = term
                .option_index_loose(s)
                .ok_or_else(|| format!("{term}: unknown option `{s}`"))?;
            Ok((TermValue::Choice(i as u8), None))
        }
        TermKind::Binary => match v {
            Value::Bool(b) => Ok((TermValue::Flag(*b), None)),
            Value::Number(n) => Ok((TermValue::Flag(n.as_f64().unwrap_or(0.0) != 0.0), None)),
            Value::String(s) => match s.trim().to_lowercase().as_str() {
                "true" | "yes" | "included" | "include" | "with" => Ok((TermValue::Flag(true), None)),
                "false" | "no" | "excluded" | "exclude" | "without" | "none" => Ok((TermValue::Flag(false), None)),
                _ => Err(format!("{term}: not a boolean: {v}")),
            },
            _ => Err(format!("{term}: not a boolean: {v}")),
        },
    }
}

fn parse_terms(v: Option<&Value>, events: &mut Vec<String>) -> PartialOffer {
    let mut offer = PartialOffer::new();
    let mut put = |name: &str, value: &Value, events: &mut Vec<String>| match canonical_term(name) {
        None => events.push(format!("dropped unknown term `{name}`")),
        Some(term) => match coerce_value(term, value) {
            Ok((tv, note)) => {
                if let Some(n) = note {
                    events.push(n);
                }
                offer.set(term, tv);
            }
            Err(e) => events.push(format!("dropped {e}")),
        },
    };
    match v {
        None | Some(Value::Null) => {}
        Some(Value::Array(items)) => {
            for item in items {
                let name = item.get("name").and_then(Value::as_str);
                match (name, item.get("value")) {
                    (Some(n), Some(val)) => put(n, val, events),
                    _ => events.push(format!("dropped malformed term entry {item}")),
                }
            }
        }
        Some(Value::Object(map)) => {
            for (k, val) in map {
                put(k, val, events);
            }
        }
        Some(other) => events.push(format!("dropped terms of unexpected shape {other}")),
    }
    offer
}

/// Parses a model response. `reasoning` is a separate reasoning channel
/// returned by some endpoints; it is prepended to any in-text trace.
pub fn parse_response(raw: &str, reasoning: Option<&str>) -> Result<ParsedResponse, ParseFailure> {
    let (inline_think, rest) = split_think(raw);
    let think = match reasoning.map(str::trim).filter(|r| !r.is_empty()) {
        Some(r) if inline_think.is_empty() => r.to_string(),
        Some(r) => format!("{r}\n{inline_think}"),
        None => inline_think,
    };
    let text = rest.replace("```json", "").replace("```JSON", "").replace("```", "");
    let (start, obj) = last_object(&text).ok_or(ParseFailure::NoJson)?;
    let dialogue = text[..start].trim().to_string();
    let mut events = Vec::new();

    let notes = match obj.get("notes") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Null) | None => String::new(),
        Some(other) => other.to_string(),
    };
    let action = match obj.get("action") {
        None => {
            events.push("missing action; treated as COUNTER with no terms".to_string());
            Action::counter(PartialOffer::new())
        }
        Some(a) => match a.as_str().map(|s| s.trim().to_uppercase()) {
            Some(s) if s == "ACCEPT" => {
                if obj.get("terms").is_some_and(|t| t.as_array().is_none_or(|a| !a.is_empty())) {
                    events.push("terms ignored on ACCEPT".to_string());
                }
                Action::accept()
            }
            Some(s) if s == "COUNTER" => Action::counter(parse_terms(obj.get("terms"), &mut events)),
            _ => {
                events.push(format!("unknown action {a}; treated as COUNTER with no terms"));
                Action::counter(PartialOffer::new())
            }
        },
    };
    let action = Action { notes, ..action };
    debug_assert!(action.kind == ActionKind::Counter || action.terms.is_empty());
    let belief_annotations = parse_sidecar(&think).map(|(items, _)| items);
    Ok(ParsedResponse { dialogue, think, action, belief_annotations, parse_events: events })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accept_after_dialogue() {
        let p = parse_response("Sounds fair, deal! {\"action\":\"ACCEPT\"}", None).unwrap();
        assert_eq!(p.action.kind, ActionKind::Accept);
        assert_eq!(p.dialogue, "Sounds fair, deal!");
    }

    #[test]
    fn counter_with_money_term() {
        let raw = r#"{"action":"COUNTER","terms":[{"name":"price","type":"money","value":35}]}"#;
        let p = parse_response(raw, None).unwrap();
        assert_eq!(p.action.kind, ActionKind::Counter);
        assert_eq!(p.action.terms, PartialOffer::new().with(Term::Price, TermValue::Number(35.0)));
    }

    #[test]
    fn no_json_fails() {
        assert_eq!(parse_response("just talking", None), Err(ParseFailure::NoJson));
        assert_eq!(parse_response("", None), Err(ParseFailure::NoJson));
        assert_eq!(parse_response("{not json", None), Err(ParseFailure::NoJson));
    }

    #[test]
    fn think_segments() {
        let raw = "<think>\nthey want a higher price\n</think>\nHi there. {\"action\": \"COUNTER\", \"terms\": []}";
        let p = parse_response(raw, None).unwrap();
        assert_eq!(p.think, "they want a higher price");
        assert_eq!(p.dialogue, "Hi there.");
        let p = parse_response("reasoning only</think>Hello {\"action\":\"COUNTER\"}", None).unwrap();
        assert_eq!(p.think, "reasoning only");
        assert!(p.parse_events.is_empty());
        let p = parse_response("Hello {\"action\":\"ACCEPT\"}", Some("side channel")).unwrap();
        assert_eq!(p.think, "side channel");
    }

    #[test]
    fn last_object_wins_and_fences_are_stripped() {
        let raw = "I said {\"action\": \"ACCEPT\"} earlier, now:\n```json\n{\"action\": \"COUNTER\", \"terms\": [{\"name\": \"Trade-In\", \"value\": 7000}, {\"name\": \"model\", \"value\": \"truck\"}, {\"name\": \"colour\", \"value\": \"Pink\"}, {\"name\": \"wheels\", \"value\": 4}]}\n```";
        let p = parse_response(raw, None).unwrap();
        assert_eq!(p.action.kind, ActionKind::Counter);
        assert_eq!(p.action.terms.get(Term::TradeIn), Some(TermValue::Number(7.0)));
        assert_eq!(p.action.terms.get(Term::Model), Some(TermValue::Choice(2)));
        assert_eq!(p.action.terms.len(), 2);
        assert_eq!(p.parse_events.len(), 3);
    }

    #[test]
    fn unknown_action_and_object_terms() {
        let p = parse_response(r#"{"action":"WALK_AWAY"}"#, None).unwrap();
        assert_eq!(p.action, Action::counter(PartialOffer::new()));
        assert_eq!(p.parse_events.len(), 1);
        let p = parse_response(r#"{"action":"counter","terms":{"price":"$36,500","accessories":"yes"},"notes":"x"}"#, None).unwrap();
        assert_eq!(p.action.terms.get(Term::Price), Some(TermValue::Number(36.5)));
        assert_eq!(p.action.terms.get(Term::Accessories), Some(TermValue::Flag(true)));
        assert_eq!(p.action.notes, "x");
    }
}
