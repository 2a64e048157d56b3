//! Prompt texts: the per-trial system prompt with the preference block,
//! and the per-turn prompt with phase instructions, the opponent
//! intelligence block and the trade-plan scaffold.
//!
//! Emoji markers of the original templates are written as the ASCII
//! placeholders `[!]`, `[>>]`, `[?]` and `[P]`.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::condition::Condition;
use crate::domain::{format_number, Role, Term};
use crate::protocol::{NegotiationState, Phase};
use crate::utility::{tier_summary, Direction, Tier, TierEntry, UtilityProfile};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub system_prompt: String,
    pub turn_prompt: String,
    pub messages: Vec<ChatMessage>,
}

impl PromptBundle {
    pub fn new(system_prompt: String, turn_prompt: String) -> Self {
        let messages = vec![ChatMessage::system(system_prompt.clone()), ChatMessage::user(turn_prompt.clone())];
        Self { system_prompt, turn_prompt, messages }
    }
}

const STRATEGY: &str = "## NEGOTIATION STRATEGY:

1. **FOLLOW YOUR PREFERENCES**: You have specific preferences listed below.
   - PRIORITIZE items marked CRITICAL (most important)
   - PUSH FOR items marked IMPORTANT (but can compromise)
   - USE flexible items as bargaining chips
   - Your goal: get outcomes that match your preferences

2. **TRADE STRATEGICALLY**: Exchange things you care less about.
   - Concede on FLEXIBLE items to win on CRITICAL items
   - Don't give away things you want without getting something back
   - Propose deals that maximize YOUR outcome

3. **REACH AGREEMENT**: Making a deal is important!
   - Any deal above your reservation value is better than no deal
   - If opponent offers seem reasonable, seriously consider accepting
   - Don't let perfect be the enemy of good
   - Converge toward mutually beneficial terms

4. **UNDERSTAND CONSTRAINTS**: The other party has HARD LIMITS too!
   - They have minimum/maximum bounds they CANNOT violate
   - If they keep rejecting certain terms, you may be outside their feasible range
   - EXPLORE different combinations - don't get stuck demanding impossible terms
   - A successful deal requires finding terms that work for BOTH parties

## RESPONSE FORMAT:

Respond with: natural dialogue (2-3 sentences), then JSON. BE CONCISE.

[!] CRITICAL: Your JSON should ONLY contain terms you explicitly mentioned
in your dialogue.

For early conversation (exploring):
  {\"action\": \"COUNTER\", \"terms\": [], \"notes\": \"exploring\"}

For proposing specific terms you mentioned:
  {\"action\": \"COUNTER\",
   \"terms\": [{\"name\": \"model\", \"type\": \"categorical\", \"value\": \"Truck\"},
             {\"name\": \"price\", \"type\": \"money\", \"value\": 35}],
   \"notes\": \"interested in truck around $35k\"}

DO NOT include terms you haven't discussed (like color, warranty, etc.)
- let them come up naturally.
";

const SYSTEM_FOOTER: &str = "NEVER mention JSON, technical details, or utility scores in your dialogue.\n";

const HOW_TO_NEGOTIATE: &str = "## HOW TO NEGOTIATE:
1. FOLLOW YOUR PREFERENCES - they determine your utility
2. PUSH for high-weight features (critical/important)
3. TRADE AWAY flexible items to get what you need
4. Express your preferences naturally through offers and reactions
5. Maximize utility = weighted sum of normalized features
";

const OPENING: &str = "START CONVERSATIONALLY - introduce yourself and express interest.

[>>] FOR YOUR JSON:
- Just exploring? -> Use empty terms: {\"action\": \"COUNTER\", \"terms\": []}
- Mentioned specific things? -> Include ONLY what you said
  Example: \"I'm interested in a truck\" ->
    {\"action\": \"COUNTER\", \"terms\": [{\"name\": \"model\",
     \"type\": \"categorical\", \"value\": \"Truck\"}]}

[!] DO NOT make up values for terms you haven't mentioned yet
(like color, warranty, etc.)
";

const EXPLORATORY: &str = "DISCUSS what matters to you. Mention specific preferences.

Your JSON should include ONLY terms you explicitly mention in your dialogue.
- Example: \"I'm looking at around $35k for a truck\" -> Include model + price only
- Missing terms will auto-fill from their previous offer (if any)

[!] DO NOT specify terms you haven't discussed - let them emerge naturally
";

const PROPOSE_COMPLETE: &str = "Time to PROPOSE A COMPLETE DEAL. State all major terms explicitly in your dialogue.

When making a complete proposal:
1. SAY all the terms in your dialogue (model, price, delivery, etc.)
2. THEN include them in your JSON
3. Don't include anything you didn't explicitly mention
";

const ACTIVE_BARGAINING: &str = "REACT to their offer. Push for better terms or accept if good enough.

For your JSON:
- Accept their offer? -> {\"action\": \"ACCEPT\"}
- Change specific terms? -> Include ONLY the terms you want to change
- Their offer auto-fills unchanged terms

[!] IMPORTANT: The other party has HARD CONSTRAINTS they cannot violate.
If they keep rejecting certain values, try different combinations -
find the overlap zone!
";

const CONVERGENCE: &str = "CONVERGE toward a deal! Find mutually acceptable terms.

[!] If they keep rejecting your proposals, you may be outside their
feasible range.
TRY DIFFERENT TERMS - don't keep demanding impossible values.
Any deal above your reservation value is better than no deal.
";

const FINAL_ROUND: &str = "FINAL ROUND! Accept their offer or make your final counter.

If their offer gives you positive utility (above reservation), ACCEPT IT.
Otherwise, make ONE FINAL counter and prepare to accept their response.
";

const STRATEGIC_GUIDELINES: &str = "**STRATEGIC GUIDELINES - use this to MAXIMIZE YOUR OWN utility:**
- Their CRITICAL items = YOUR leverage. They need these badly ->
  demand concessions on YOUR priorities in exchange.
- Items YOU value but THEY don't care about -> Push hard here -
  giving you what you want costs them almost nothing.
- Items THEY value but YOU don't -> Only concede these in exchange for
  something YOU care about. Never give them away for free.
- Know their walk-away point: propose terms that give them JUST ENOUGH
  to accept, keeping maximum surplus for yourself.
";

const TRADE_PLAN: &str = "## [P] TRADE PLAN - complete this BEFORE writing your dialogue:

Based on what you know (opponent preferences if available, conversation
history otherwise), package a concrete trade before acting:

  STEP 1 - Feature to CONCEDE (they seem to want it, and giving it
    costs you little):
    -> Feature: ___   Direction: ___
    -> Why it's cheap for you: ___

  STEP 2 - Feature to DEMAND in return (you want it - don't give it
    away for free):
    -> Feature: ___   Direction: ___
    -> Why you should extract this now: ___

  STEP 3 - Your package: \"I'll give them ___ IF they give me ___\"

  (If no trade makes sense this turn, state why in one sentence.)

Only AFTER completing the plan above, write your dialogue and JSON.
";

const TURN_FOOTER: &str = "Respond with: dialogue (2-3 sentences) + JSON action.

[!] REQUIRED: After any thinking, you MUST output your dialogue text and
JSON code block. Complete your full response.
";

/// Placeholder for the conversation section before anyone has spoken.
pub const EMPTY_HISTORY: &str = "(no messages yet)";
/// Current-offer text when no offer has been made.
pub const NO_OFFER: &str = "None (you go first)";

pub fn phase_text(phase: Phase) -> &'static str {
    match phase {
        Phase::Opening => OPENING,
        Phase::Exploratory => EXPLORATORY,
        Phase::ProposeComplete => PROPOSE_COMPLETE,
        Phase::ActiveBargaining => ACTIVE_BARGAINING,
        Phase::Convergence => CONVERGENCE,
        Phase::FinalRound => FINAL_ROUND,
    }
}

pub fn trade_plan_block() -> &'static str {
    TRADE_PLAN
}

/// Terms, JSON names and the role's own valid ranges.
pub fn domain_context(role: Role) -> String {
    let mut s = String::from("## NEGOTIABLE TERMS (JSON name, type, your valid range):\n");
    for term in Term::ALL {
        let line = match term {
            Term::Price | Term::TradeIn => {
                let r = term.range(role).expect("continuous");
                format!("{} (money, $k): {} to {}", term.name(), format_number(r.lo), format_number(r.hi))
            }
            Term::Delivery => {
                let r = term.range(role).expect("continuous");
                format!("{} (days): {} to {}", term.name(), format_number(r.lo), format_number(r.hi))
            }
            Term::DownPayment => {
                let r = term.range(role).expect("continuous");
                format!("{} (percent): {} to {}", term.name(), format_number(r.lo), format_number(r.hi))
            }
            Term::Accessories => format!("{} (boolean): true or false", term.name()),
            _ => format!("{} (categorical): {}", term.name(), term.options().join(", ")),
        };
        let _ = writeln!(s, "  - {line}");
    }
    let _ = writeln!(s, "Available car models: {}", Term::Model.options().join(", "));
    s.push_str("Values outside your range are not possible for you.\n");
    s
}

fn own_label(entry: &TierEntry) -> String {
    let choice = match &entry.direction {
        Direction::Choose(o) => o.as_str(),
        _ => "",
    };
    match entry.group {
        Term::Price => "Price".into(),
        Term::Delivery => "Delivery Day".into(),
        Term::DownPayment => "Down Payment".into(),
        Term::TradeIn => "Trade In".into(),
        Term::Model => format!("Is {choice}"),
        Term::Color => format!("Color {choice}"),
        Term::Interior => format!("Interior {choice}"),
        Term::Warranty => format!("Warranty {}", capitalize(choice)),
        Term::Service => format!("Service {}", capitalize(choice)),
        Term::Accessories => "Has Accessories".into(),
    }
}

fn intel_label(term: Term) -> &'static str {
    match term {
        Term::Price => "Price",
        Term::Delivery => "Delivery Day",
        Term::DownPayment => "Down Payment",
        Term::TradeIn => "Trade In",
        Term::Model => "Model",
        Term::Color => "Color",
        Term::Interior => "Interior",
        Term::Warranty => "Warranty",
        Term::Service => "Service",
        Term::Accessories => "Has Accessories",
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Direction text, e.g. `increase price (higher price -> higher utility)`.
/// The intel block appends "for them" to the utility clause and uses the
/// shorter option phrasing for interiors.
fn direction_text(entry: &TierEntry, for_them: bool) -> String {
    let who = if for_them { "higher utility for them" } else { "higher utility" };
    let inc = entry.direction == Direction::Increase;
    match (&entry.direction, entry.group) {
        (Direction::Increase | Direction::Decrease, Term::Price) => {
            if inc {
                format!("increase price (higher price -> {who})")
            } else {
                format!("decrease price (lower price -> {who})")
            }
        }
        (Direction::Increase | Direction::Decrease, Term::Delivery) => {
            if inc {
                format!("increase delivery time (later delivery -> {who})")
            } else {
                format!("decrease delivery time (faster -> {who})")
            }
        }
        (Direction::Increase | Direction::Decrease, Term::DownPayment) => {
            if inc {
                format!("increase down payment (higher down payment -> {who})")
            } else {
                format!("decrease down payment (lower down payment -> {who})")
            }
        }
        (Direction::Increase | Direction::Decrease, Term::TradeIn) => {
            if inc {
                format!("increase trade-in value (higher value -> {who})")
            } else {
                format!("decrease trade-in value (lower value -> {who})")
            }
        }
        (Direction::Include, _) => format!("include accessories (accessories=true -> {who})"),
        (Direction::Exclude, _) => format!("exclude accessories (accessories=false -> {who})"),
        (Direction::Choose(o), Term::Model) => format!("choose {o} (selecting {o} -> {who})"),
        (Direction::Choose(o), Term::Color) => format!("choose {o} color ({o} -> {who})"),
        (Direction::Choose(o), Term::Interior) if for_them => format!("choose {o} ({o} -> {who})"),
        (Direction::Choose(o), Term::Interior) => format!("choose {o} interior ({o} -> {who})"),
        (Direction::Choose(o), Term::Warranty) => format!("choose {o} warranty ({o} -> {who})"),
        (Direction::Choose(o), Term::Service) => format!("choose {o} service ({o} -> {who})"),
        (d, t) => format!("{d:?} {}", t.name()),
    }
}

fn tier_sections(entries: &[TierEntry], headers: [&str; 3], for_them: bool) -> String {
    let mut s = String::new();
    for (i, tier) in [Tier::Critical, Tier::Important, Tier::Flexible].into_iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        let _ = writeln!(s, "**{}** ({}):", tier.label(), headers[i]);
        for e in entries.iter().filter(|e| e.tier == tier) {
            let label = if for_them { intel_label(e.group).to_string() } else { own_label(e) };
            let _ = writeln!(s, "  - {}: {}", label, direction_text(e, for_them));
        }
    }
    s
}

/// The agent's own tiered preference block.
pub fn preference_block(role: Role, tiers: &[TierEntry]) -> String {
    let mut s = String::from("## YOUR PREFERENCES (follow these strictly to maximize your utility):\n");
    let _ = writeln!(s, "Role: {}\n", role.upper());
    s.push_str(&tier_sections(
        tiers,
        ["fight hard, don't easily concede", "push for", "use as bargaining chips"],
        false,
    ));
    s.push('\n');
    s.push_str(HOW_TO_NEGOTIATE);
    s
}

/// Opponent tiers and directions phrased from the opponent's side, plus
/// the strategic guidelines. Never contains numeric weights.
pub fn intel_block(opponent_tiers: &[TierEntry]) -> String {
    let mut s = String::from("## [?] INTELLIGENCE ON OPPONENT'S PREFERENCES:\n\n");
    s.push_str(&tier_sections(
        opponent_tiers,
        ["very important to them", "moderately important to them", "they don't care much"],
        true,
    ));
    s.push('\n');
    s.push_str(STRATEGIC_GUIDELINES);
    s
}

pub fn system_prompt(role: Role, profile: &UtilityProfile) -> String {
    let verb = match role {
        Role::Buyer => "purchase",
        Role::Seller => "sell",
    };
    let mut s = format!("You are a {} negotiating to {verb} a car.\n\n", role.upper());
    s.push_str(STRATEGY);
    s.push('\n');
    s.push_str(&domain_context(role));
    s.push('\n');
    s.push_str(&preference_block(role, &tier_summary(profile)));
    s.push('\n');
    s.push_str(SYSTEM_FOOTER);
    s
}

/// Dialogue lines of the transcript so far, `BUYER: ...` / `SELLER: ...`.
pub fn history(state: &NegotiationState) -> String {
    if state.transcript.is_empty() {
        return format!("{EMPTY_HISTORY}\n");
    }
    let mut s = String::new();
    for t in &state.transcript {
        let _ = writeln!(s, "{}: {}", t.role.upper(), t.dialogue.trim());
    }
    s
}

pub fn current_offer_text(state: &NegotiationState) -> String {
    match (&state.offer_on_table, &state.last_partial) {
        (Some(c), _) => c.describe(),
        (None, Some(p)) => format!("{} (partial)", p.describe()),
        (None, None) => NO_OFFER.to_string(),
    }
}

/// Turn prompt for the role about to move. `opponent` carries the
/// opponent's profile only when the condition informs this role.
pub fn turn_prompt(state: &NegotiationState, condition: Condition, opponent: Option<&UtilityProfile>) -> String {
    let role = state.to_move();
    let mut s = String::from("## CONVERSATION:\n");
    s.push_str(&history(state));
    let _ = writeln!(s, "\n## CURRENT OFFER ON TABLE: {}\n", current_offer_text(state));
    let _ = writeln!(s, "## YOUR TURN (Turn {}):", state.next_turn());
    s.push_str(phase_text(state.phase()));
    if condition.informed(role) {
        if let Some(opp) = opponent {
            s.push('\n');
            s.push_str(&intel_block(&tier_summary(opp)));
        }
    }
    if condition.trade_plan() {
        s.push('\n');
        s.push_str(TRADE_PLAN);
    }
    s.push('\n');
    s.push_str(TURN_FOOTER);
    s
}

/// Both prompts for the role about to move.
pub fn bundle(
    state: &NegotiationState,
    condition: Condition,
    own: &UtilityProfile,
    opponent: &UtilityProfile,
) -> PromptBundle {
    let role = state.to_move();
    let opp = condition.informed(role).then_some(opponent);
    PromptBundle::new(system_prompt(role, own), turn_prompt(state, condition, opp))
}
