//! Interactive ASC learning.
//!
//! A session verifies one grounding outcome with the user. On "no" it offers
//! every action whose arguments overlap the reduced command, ranked by the
//! matcher; once the user picks one and confirms the argument values, the
//! reduced command becomes a new template for that action.
//!
//! ```text
//! awaiting_verification --yes/silence--> done_confirmed
//!        |no
//!        v
//! awaiting_choice --index--> awaiting_arg_confirm --confirm--> done_learned
//!    ^   |reject(+rephrased, attempt < m)       |not confirmed
//!    +---+------------------------------------- +
//!        |reject (no rephrasing, or attempt = m) --> done_failed
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::Engine;
use crate::env::Environment;
use crate::grounder::{ground, Binding, GroundError, GroundingOptions, GroundingResult};
use crate::matcher::rank;
use crate::spec::{Aid, Asc, AscKind, AscTemplate, TemplateToken};
use crate::store::{AscStore, StoreError};
use crate::tagger::{TaggedCommand, TaggedToken};
use crate::text;
use crate::value::Value;

pub const DEFAULT_MAX_ATTEMPTS: usize = 3;
pub const VERIFY_PROMPT: &str = "Am I correct? [yes/No]";

#[derive(Debug, thiserror::Error)]
pub enum LearnerError {
    #[error("operation {operation} is not allowed in state {state:?}")]
    InvalidState { operation: &'static str, state: LearnerState },
    #[error("option {index} is out of range ({count} options)")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("the command's arguments {found:?} do not fit {api}'s inputs {expected:?}")]
    ArgumentMismatch { api: String, expected: Vec<String>, found: Vec<String> },
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerState {
    AwaitingVerification,
    AwaitingChoice,
    AwaitingArgConfirm,
    DoneLearned,
    DoneConfirmed,
    DoneFailed,
}

impl LearnerState {
    pub fn is_done(self) -> bool {
        matches!(self, LearnerState::DoneLearned | LearnerState::DoneConfirmed | LearnerState::DoneFailed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Yes,
    No,
    /// No reply within the client's timeout; treated like yes.
    Silence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    Index(usize),
    Reject { rephrased: Option<String> },
}

/// One candidate action shown to the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedOption {
    pub aid: Aid,
    pub api: String,
    /// Reduced command with values substituted, e.g. "put a block to (2, 3)".
    pub nl_text: String,
    /// The action's best template filled with the same values.
    pub asc_text: String,
    pub score: f64,
    /// Input slots the reduced command can fill, by type.
    pub bindings: Vec<Binding>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearnerSession {
    pub session_id: String,
    pub original_command: String,
    /// Latest phrasing; changes when the user rephrases.
    pub current_command: String,
    pub state: LearnerState,
    pub options: Vec<RankedOption>,
    /// 1-based.
    pub attempt: usize,
    pub max_attempts: usize,
    pub chosen: Option<usize>,
    pub grounding: GroundingResult,
    /// The action with only the newly learned template, once learned.
    pub learned_asc: Option<Asc>,
    pub prompt: String,
}

pub fn start_session(session_id: impl Into<String>, command: &str, result: GroundingResult) -> LearnerSession {
    LearnerSession {
        session_id: session_id.into(),
        original_command: command.to_string(),
        current_command: command.to_string(),
        state: LearnerState::AwaitingVerification,
        options: Vec::new(),
        attempt: 1,
        max_attempts: DEFAULT_MAX_ATTEMPTS,
        chosen: None,
        grounding: result,
        learned_asc: None,
        prompt: VERIFY_PROMPT.to_string(),
    }
}

fn render_value(value: &Value, surface: &str) -> String {
    match value {
        Value::Point(x, y) => format!("({x}, {y})"),
        Value::Literal(_) | Value::Ids(_) => surface.to_string(),
    }
}

/// User-visible words of a reduced command, variables rendered by value.
fn render_reduced(reduced: &TaggedCommand) -> String {
    reduced
        .tokens
        .iter()
        .map(|t| match t {
            TaggedToken::Word(w) => w.surface.clone(),
            TaggedToken::Var(v) => render_value(&v.value, &v.surface),
        })
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Pairs each input slot of `asc` with the first unused reduced variable of
/// the same type.
fn bind_by_type(asc: &Asc, reduced: &TaggedCommand) -> Vec<Binding> {
    let mut used = vec![false; reduced.variable_count()];
    let vars: Vec<_> = reduced.variables().collect();
    let mut bindings = Vec::new();
    for slot in &asc.inputs {
        if let Some(i) = (0..vars.len()).find(|&i| !used[i] && vars[i].ty == slot.ty) {
            used[i] = true;
            bindings.push(Binding {
                slot: slot.name.clone(),
                ty: slot.ty.clone(),
                value: vars[i].value.clone(),
                surface: vars[i].surface.clone(),
            });
        }
    }
    bindings
}

fn fill_template(template: &AscTemplate, bindings: &[Binding], asc: &Asc) -> String {
    template
        .tokens
        .iter()
        .map(|t| match t {
            TemplateToken::Word(w) => w.clone(),
            TemplateToken::Slot(s) => match bindings.iter().find(|b| &b.slot == s) {
                Some(b) => render_value(&b.value, &b.surface),
                None => asc.input(s).map(|slot| format!("<{}>", slot.ty)).unwrap_or_default(),
            },
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Ranked alternatives for a reduced command: one per action API with at
/// least one argument the command can supply.
pub fn generate_options(reduced: &TaggedCommand, engine: &Engine, options: &GroundingOptions) -> Result<Vec<RankedOption>, LearnerError> {
    let spec = engine.spec();
    let scorer = engine.scorer(options.matcher, AscKind::Action).map_err(GroundError::from)?;
    let candidates: Vec<(&Asc, usize)> =
        spec.actions().flat_map(|a| (0..a.templates.len()).map(move |i| (a, i))).collect();
    let nl_text = render_reduced(reduced);
    let mut out = Vec::new();
    for m in rank(&candidates, &reduced.match_tokens(), scorer) {
        let asc = spec.asc(m.aid).expect("ranked action exists");
        let bindings = bind_by_type(asc, reduced);
        if bindings.is_empty() {
            continue;
        }
        out.push(RankedOption {
            aid: asc.aid,
            api: asc.api.clone(),
            nl_text: nl_text.clone(),
            asc_text: fill_template(&asc.templates[m.template_index], &bindings, asc),
            score: m.score,
            bindings,
        });
    }
    Ok(out)
}

/// The reduced command as a template for `asc`: words from what the user
/// typed, each variable replaced by the input slot of its type.
pub fn template_from_reduced(reduced: &TaggedCommand, asc: &Asc) -> Result<AscTemplate, LearnerError> {
    let mismatch = || {
        let mut expected: Vec<String> = asc.inputs.iter().map(|s| s.ty.clone()).collect();
        let mut found = reduced.type_sequence();
        expected.sort();
        found.sort();
        LearnerError::ArgumentMismatch { api: asc.api.clone(), expected, found }
    };
    if reduced.variable_count() != asc.inputs.len() {
        return Err(mismatch());
    }
    let mut used = vec![false; asc.inputs.len()];
    let mut tokens = Vec::new();
    for token in &reduced.tokens {
        match token {
            TaggedToken::Word(w) => tokens.extend(text::words(&w.surface).into_iter().map(TemplateToken::Word)),
            TaggedToken::Var(v) => {
                let i = (0..asc.inputs.len()).find(|&i| !used[i] && asc.inputs[i].ty == v.ty).ok_or_else(mismatch)?;
                used[i] = true;
                tokens.push(TemplateToken::Slot(asc.inputs[i].name.clone()));
            }
        }
    }
    Ok(AscTemplate { tokens })
}

impl LearnerSession {
    fn expect(&self, state: LearnerState, operation: &'static str) -> Result<(), LearnerError> {
        if self.state == state {
            Ok(())
        } else {
            Err(LearnerError::InvalidState { operation, state: self.state })
        }
    }

    fn show_options(&mut self, engine: &Engine, options: &GroundingOptions) -> Result<(), LearnerError> {
        self.options = generate_options(&self.grounding.reduced, engine, options)?;
        self.state = LearnerState::AwaitingChoice;
        self.prompt = if self.options.is_empty() {
            "I have no suggestions. Please rephrase the command or reject.".to_string()
        } else {
            "Which of these did you mean? Pick one, or rephrase the command.".to_string()
        };
        Ok(())
    }

    pub fn answer_verification(
        &mut self,
        answer: Answer,
        engine: &Engine,
        options: &GroundingOptions,
    ) -> Result<(), LearnerError> {
        self.expect(LearnerState::AwaitingVerification, "verify")?;
        match answer {
            Answer::Yes | Answer::Silence => {
                self.state = LearnerState::DoneConfirmed;
                self.prompt.clear();
                Ok(())
            }
            Answer::No => self.show_options(engine, options),
        }
    }

    pub fn choose_option(
        &mut self,
        choice: Choice,
        engine: &Engine,
        options: &GroundingOptions,
        env: &dyn Environment,
    ) -> Result<(), LearnerError> {
        self.expect(LearnerState::AwaitingChoice, "choose")?;
        match choice {
            Choice::Index(index) => {
                if index >= self.options.len() {
                    return Err(LearnerError::IndexOutOfRange { index, count: self.options.len() });
                }
                self.chosen = Some(index);
                self.state = LearnerState::AwaitingArgConfirm;
                let option = &self.options[index];
                let values: Vec<String> =
                    option.bindings.iter().map(|b| format!("{} = {}", b.slot, render_value(&b.value, &b.surface))).collect();
                self.prompt = format!("{}: are these arguments right? {}", option.api, values.join(", "));
            }
            Choice::Reject { rephrased: Some(text) } if self.attempt < self.max_attempts => {
                let result = ground(engine, &text, options, env)?;
                self.attempt += 1;
                self.current_command = text;
                self.grounding = result;
                self.chosen = None;
                self.show_options(engine, options)?;
            }
            Choice::Reject { .. } => {
                self.state = LearnerState::DoneFailed;
                self.options.clear();
                self.prompt.clear();
            }
        }
        Ok(())
    }

    pub fn confirm_arguments(&mut self, confirmed: bool, store: &AscStore) -> Result<(), LearnerError> {
        self.expect(LearnerState::AwaitingArgConfirm, "confirm")?;
        if !confirmed {
            self.chosen = None;
            self.state = LearnerState::AwaitingChoice;
            self.prompt = "Which of these did you mean? Pick one, or rephrase the command.".to_string();
            return Ok(());
        }
        let aid = self.options[self.chosen.expect("chosen in awaiting_arg_confirm")].aid;
        let engine = store.engine();
        let asc = engine.spec().asc(aid).expect("options come from the spec");
        let template = template_from_reduced(&self.grounding.reduced, asc)?;
        store.add_template(aid, template.clone())?;
        let mut learned = asc.clone();
        learned.templates = vec![template];
        self.learned_asc = Some(learned);
        self.state = LearnerState::DoneLearned;
        self.prompt.clear();
        Ok(())
    }

    /// Template source of the learned ASC, e.g. `put a block to {X1:location}`.
    pub fn learned_template_source(&self) -> Option<String> {
        self.learned_asc.as_ref().map(|a| a.templates[0].to_source(a))
    }
}

/// Options keyed by AID, for callers that pick by action rather than index.
pub fn option_index(options: &[RankedOption], aid: Aid) -> Option<usize> {
    let by_aid: BTreeMap<Aid, usize> = options.iter().enumerate().rev().map(|(i, o)| (o.aid, i)).collect();
    by_aid.get(&aid).copied()
}
