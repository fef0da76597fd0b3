//! Iterative command grounding.
//!
//! The working command is matched against action templates by its variable
//! type sequence. While nothing matches, sub-expressions (runs of adjacent
//! variables and the words between them) are reduced one at a time with
//! utility templates, whose runtime outputs replace the consumed span as a
//! new typed variable. Reductions repeat until an action matches or no
//! sub-expression can be reduced.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::engine::{Engine, EngineError};
use crate::env::{EnvError, Environment};
use crate::matcher::{rank, MatcherKind, Scorer};
use crate::spec::{type_sequence, AppSpec, Aid, Asc, AscKind, AscTemplate, TemplateToken};
use crate::tagger::{TagError, TaggedCommand, TaggedToken, Variable};
use crate::text;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundingOptions {
    pub matcher: MatcherKind,
    /// Rewrite out-of-vocabulary words with the synonym lexicon.
    pub rephrase: bool,
    /// Reduce sub-expressions with utility templates.
    pub utilities: bool,
    /// A top action scoring at or below this is treated as no match.
    pub threshold: f64,
    /// Skip action candidates that share no content word with the command,
    /// i.e. whose only resemblance is the argument types.
    #[serde(default = "yes")]
    pub require_word_overlap: bool,
}

fn yes() -> bool {
    true
}

impl Default for GroundingOptions {
    fn default() -> Self {
        GroundingOptions {
            matcher: MatcherKind::Vsm,
            rephrase: true,
            utilities: true,
            threshold: 0.0,
            require_word_overlap: true,
        }
    }
}

impl GroundingOptions {
    pub fn with_matcher(matcher: MatcherKind) -> Self {
        GroundingOptions { matcher, ..Self::default() }
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GroundError {
    #[error(transparent)]
    Tag(#[from] TagError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ReduceError {
    #[error("no template of utility {0} fits the sub-expression")]
    NoTemplate(Aid),
    #[error("utility failed: {0}")]
    Execution(#[from] EnvError),
    #[error("utility returned an empty set")]
    EmptyResult,
    #[error("adjacent references have no object in common")]
    EmptyIntersection,
}

/// A run of `m` consecutive variables of the working command together with
/// the words between them. Indices are token positions; `end` is inclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubExpression {
    pub start: usize,
    pub end: usize,
    pub variables: Vec<usize>,
}

impl SubExpression {
    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn tokens<'a>(&self, command: &'a TaggedCommand) -> &'a [TaggedToken] {
        &command.tokens[self.start..=self.end]
    }

    pub fn type_sequence(&self, command: &TaggedCommand) -> Vec<String> {
        self.vars(command).map(|v| v.ty.clone()).collect()
    }

    pub fn vars<'a>(&'a self, command: &'a TaggedCommand) -> impl Iterator<Item = &'a Variable> + 'a {
        self.variables.iter().filter_map(move |&i| command.tokens[i].as_var())
    }

    pub fn render(&self, command: &TaggedCommand) -> String {
        TaggedCommand { raw: String::new(), tokens: self.tokens(command).to_vec() }.to_string()
    }
}

/// All sub-expressions with 1 ≤ m < n variables, shortest first and left to
/// right within a length. The n-variable expression is left out: only action
/// templates match it.
pub fn enumerate_subexpressions(command: &TaggedCommand) -> Vec<SubExpression> {
    let positions = variable_positions(command);
    let n = positions.len();
    let mut out = Vec::new();
    for m in 1..n {
        for i in 0..=n - m {
            let vars = &positions[i..i + m];
            out.push(SubExpression { start: vars[0], end: vars[m - 1], variables: vars.to_vec() });
        }
    }
    out
}

fn variable_positions(command: &TaggedCommand) -> Vec<usize> {
    command
        .tokens
        .iter()
        .enumerate()
        .filter(|(_, t)| t.as_var().is_some())
        .map(|(i, _)| i)
        .collect()
}

/// Span over every variable; tried last so a one-variable command such as
/// "remove color/X1" can still have its only argument resolved.
fn whole_span(command: &TaggedCommand) -> Option<SubExpression> {
    let positions = variable_positions(command);
    Some(SubExpression { start: *positions.first()?, end: *positions.last()?, variables: positions })
}

/// Outcome of the utility-constraint filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    pub kept: Vec<SubExpression>,
    /// Action (AID, template index) whose constraints were applied.
    pub top_action: Option<(Aid, usize)>,
    /// Ids of variables that must not be reduced.
    pub protected: BTreeSet<usize>,
}

/// Drops sub-expressions that would reduce a variable bound to a starred
/// slot of the top-ranked action.
///
/// The top action is ranked among action templates whose type sequence the
/// command can still reach through utility reductions; the starred slots of
/// that template protect the original variables that stay in place along the
/// way. If no template is reachable, all actions are ranked and starred
/// slots are aligned to command variables by type, left to right.
pub fn filter_subexpressions(
    sp: Vec<SubExpression>,
    command: &TaggedCommand,
    spec: &AppSpec,
    scorer: Scorer<'_>,
) -> Filtered {
    let query = command.match_tokens();
    let states = reachable_states(command, spec);
    let mut goals: BTreeMap<(Aid, usize), usize> = BTreeMap::new();
    for asc in spec.actions() {
        for (ti, template) in asc.templates.iter().enumerate() {
            let seq = type_sequence(asc, template);
            if let Some(si) = states.iter().position(|s| s.types().eq(seq.iter().map(String::as_str))) {
                goals.insert((asc.aid, ti), si);
            }
        }
    }

    let mut protected = BTreeSet::new();
    let top_action = if !goals.is_empty() {
        let candidates: Vec<(&Asc, usize)> =
            goals.keys().map(|(aid, ti)| (spec.asc(*aid).expect("action exists"), *ti)).collect();
        let top = &rank(&candidates, &query, scorer)[0];
        let asc = spec.asc(top.aid).expect("ranked action exists");
        let state = &states[goals[&(top.aid, top.template_index)]];
        for (p, slot) in asc.templates[top.template_index].slots().enumerate() {
            if asc.input(slot).is_some_and(|s| s.starred) {
                protected.extend(state.slots[p].origin);
            }
        }
        Some((top.aid, top.template_index))
    } else {
        let candidates: Vec<(&Asc, usize)> =
            spec.actions().flat_map(|a| (0..a.templates.len()).map(move |ti| (a, ti))).collect();
        rank(&candidates, &query, scorer).first().map(|top| {
            let asc = spec.asc(top.aid).expect("ranked action exists");
            let vars: Vec<&Variable> = command.variables().collect();
            let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
            for slot in asc.templates[top.template_index].slots() {
                let Some(slot) = asc.input(slot) else { continue };
                let k = seen.entry(slot.ty.as_str()).or_insert(0);
                if slot.starred {
                    if let Some(v) = vars.iter().filter(|v| v.ty == slot.ty).nth(*k) {
                        protected.insert(v.id);
                    }
                }
                *k += 1;
            }
            (top.aid, top.template_index)
        })
    };

    let kept = sp
        .into_iter()
        .filter(|s| s.vars(command).all(|v| !protected.contains(&v.id)))
        .collect();
    Filtered { kept, top_action, protected }
}

const MAX_REACHABLE_STATES: usize = 2048;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct TypeSlot {
    ty: String,
    /// Original variable id, or `None` once produced by a reduction.
    origin: Option<usize>,
}

/// Abstract command: variable types plus whether words separate neighbours.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct TypeState {
    slots: Vec<TypeSlot>,
    gaps: Vec<bool>,
}

impl TypeState {
    fn types(&self) -> impl Iterator<Item = &str> {
        self.slots.iter().map(|s| s.ty.as_str())
    }

    fn replace(&self, i: usize, k: usize, ty: &str) -> TypeState {
        let mut slots = self.slots[..i].to_vec();
        slots.push(TypeSlot { ty: ty.to_string(), origin: None });
        slots.extend_from_slice(&self.slots[i + k..]);
        let mut gaps = self.gaps[..i].to_vec();
        gaps.extend_from_slice(&self.gaps[i + k - 1..]);
        TypeState { slots, gaps }
    }
}

/// Breadth-first closure of the command's type sequence under utility
/// reductions and merges of adjacent same-typed sets.
fn reachable_states(command: &TaggedCommand, spec: &AppSpec) -> Vec<TypeState> {
    let positions = variable_positions(command);
    let initial = TypeState {
        slots: command.variables().map(|v| TypeSlot { ty: v.ty.clone(), origin: Some(v.id) }).collect(),
        gaps: positions.windows(2).map(|w| w[1] > w[0] + 1).collect(),
    };
    let rules: BTreeSet<(Vec<String>, String)> = spec
        .utilities()
        .flat_map(|u| {
            let out = u.output_type().unwrap_or_default().to_string();
            u.templates.iter().map(move |t| (type_sequence(u, t), out.clone()))
        })
        .filter(|(seq, _)| !seq.is_empty())
        .collect();

    let mut seen = BTreeSet::from([initial.clone()]);
    let mut order = vec![initial.clone()];
    let mut queue = VecDeque::from([initial]);
    while let Some(state) = queue.pop_front() {
        let mut next = Vec::new();
        for (seq, out) in &rules {
            let k = seq.len();
            if k > state.slots.len() {
                continue;
            }
            for i in 0..=state.slots.len() - k {
                if state.slots[i..i + k].iter().zip(seq).all(|(s, t)| &s.ty == t) {
                    next.push(state.replace(i, k, out));
                }
            }
        }
        for i in 0..state.slots.len().saturating_sub(1) {
            let ty = &state.slots[i].ty;
            if !state.gaps[i] && *ty == state.slots[i + 1].ty && spec.is_set_type(ty) {
                next.push(state.replace(i, 2, &ty.clone()));
            }
        }
        for s in next {
            if order.len() >= MAX_REACHABLE_STATES {
                return order;
            }
            if seen.insert(s.clone()) {
                order.push(s.clone());
                queue.push_back(s);
            }
        }
    }
    order
}

/// `(asc, template index)` pairs of `pool` whose input type sequence equals
/// `types`, in ascending AID order.
pub fn get_candidate_ascs<'a>(spec: &'a AppSpec, pool: AscKind, types: &[String]) -> Vec<(&'a Asc, usize)> {
    let mut out: Vec<(&Asc, usize)> = spec
        .pool(pool)
        .flat_map(|a| {
            a.templates
                .iter()
                .enumerate()
                .filter(|(_, t)| type_sequence(a, t) == types)
                .map(move |(i, _)| (a, i))
        })
        .collect();
    out.sort_by_key(|(a, i)| (a.aid, *i));
    out
}

/// Copy of the sub-expression with variables renumbered X1..Xk; the map
/// sends each new name to the name it had in the working command.
pub fn rename_for_match(command: &TaggedCommand, sub: &SubExpression) -> (TaggedCommand, BTreeMap<String, String>) {
    let mut renamed = TaggedCommand { raw: command.raw.clone(), tokens: sub.tokens(command).to_vec() };
    let before: Vec<String> = renamed.variables().map(|v| v.name.clone()).collect();
    renamed.rename_dense();
    let aliases = renamed.variables().map(|v| v.name.clone()).zip(before).collect();
    (renamed, aliases)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    pub slot: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub value: Value,
    /// Command text the value came from.
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionCall {
    pub aid: Aid,
    pub api: String,
    /// In the ASC's declared input order.
    pub arguments: Vec<Binding>,
}

impl ActionCall {
    pub fn values(&self) -> Vec<Value> {
        self.arguments.iter().map(|b| b.value.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiredUtility {
    pub aid: Aid,
    pub api: String,
    pub arguments: Vec<Binding>,
    pub output: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Tagged,
    Reduced,
    ReductionFailed,
    Grounded,
    NotGrounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub kind: StepKind,
    /// Working command after the step, variables numbered densely.
    pub command: String,
    /// Working command right after replacement, before renumbering.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub before_renaming: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_expression: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aid: Option<Aid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bindings: Vec<Binding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TraceStep {
    fn new(kind: StepKind, command: &TaggedCommand) -> Self {
        TraceStep {
            kind,
            command: command.to_string(),
            before_renaming: None,
            sub_expression: None,
            aid: None,
            api: None,
            score: None,
            bindings: Vec::new(),
            note: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingResult {
    pub command: String,
    /// Fired utilities in order, then the action; empty when not groundable.
    pub aid_sequence: Vec<Aid>,
    pub action: Option<ActionCall>,
    pub fired: Vec<FiredUtility>,
    /// Matcher score of the chosen action.
    pub score: Option<f64>,
    /// Command right after tagging and rephrasing.
    pub tagged: TaggedCommand,
    /// Working command when grounding stopped.
    pub reduced: TaggedCommand,
    pub trace: Vec<TraceStep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub iterations: usize,
}

impl GroundingResult {
    pub fn is_grounded(&self) -> bool {
        self.action.is_some()
    }

    pub fn action_aid(&self) -> Option<Aid> {
        self.action.as_ref().map(|a| a.aid)
    }

    /// The tagged command followed by the command after each reduction.
    pub fn command_chain(&self) -> Vec<String> {
        self.trace
            .iter()
            .filter(|s| matches!(s.kind, StepKind::Tagged | StepKind::Reduced))
            .map(|s| s.command.clone())
            .collect()
    }
}

/// Mutable state of one grounding run.
#[derive(Debug, Clone)]
pub struct GroundingState {
    pub working: TaggedCommand,
    /// Utility outputs by variable id.
    pub output_buffer: BTreeMap<usize, Value>,
    pub fired: Vec<FiredUtility>,
    pub iteration_count: usize,
    next_id: usize,
}

impl GroundingState {
    pub fn new(tagged: TaggedCommand) -> Self {
        let next_id = tagged.variables().map(|v| v.id + 1).max().unwrap_or(0);
        GroundingState {
            working: tagged,
            output_buffer: BTreeMap::new(),
            fired: Vec::new(),
            iteration_count: 0,
            next_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub template_index: usize,
    pub before_renaming: String,
    pub fired: FiredUtility,
}

fn leading_words(template: &AscTemplate) -> Vec<&str> {
    template
        .tokens
        .iter()
        .map_while(|t| match t {
            TemplateToken::Word(w) => Some(w.as_str()),
            TemplateToken::Slot(_) => None,
        })
        .collect()
}

fn trailing_words(template: &AscTemplate) -> Vec<&str> {
    let mut words: Vec<&str> = template
        .tokens
        .iter()
        .rev()
        .map_while(|t| match t {
            TemplateToken::Word(w) => Some(w.as_str()),
            TemplateToken::Slot(_) => None,
        })
        .collect();
    words.reverse();
    words
}

fn words_match(tokens: &[TaggedToken], words: &[&str]) -> bool {
    tokens.len() == words.len() && tokens.iter().zip(words).all(|(t, w)| t.as_word().is_some_and(|x| x.text == *w))
}

/// Command words next to `sub` that the template's outer words account for:
/// the longest suffix of its leading words and the longest prefix of its
/// trailing words.
fn absorption(tokens: &[TaggedToken], sub: &SubExpression, template: &AscTemplate) -> (usize, usize) {
    let lead = leading_words(template);
    let trail = trailing_words(template);
    let left = (1..=lead.len().min(sub.start))
        .rev()
        .find(|&k| words_match(&tokens[sub.start - k..sub.start], &lead[lead.len() - k..]))
        .unwrap_or(0);
    let right = (1..=trail.len().min(tokens.len() - sub.end - 1))
        .rev()
        .find(|&k| words_match(&tokens[sub.end + 1..=sub.end + k], &trail[..k]))
        .unwrap_or(0);
    (left, right)
}

fn surface_of(tokens: &[TaggedToken]) -> String {
    tokens
        .iter()
        .map(|t| match t {
            TaggedToken::Word(w) => w.surface.as_str(),
            TaggedToken::Var(v) => v.surface.as_str(),
        })
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

fn binding(slot: &str, v: &Variable) -> Binding {
    Binding { slot: slot.to_string(), ty: v.ty.clone(), value: v.value.clone(), surface: v.surface.clone() }
}

/// Replaces `sub` with the output of `utility` executed on its values.
///
/// Among the utility's templates that fit the sub-expression, the one whose
/// outer words cover the most neighbouring command words is used, and those
/// words are consumed with the span. A set-typed output that lands directly
/// next to a variable of the same set type is intersected with it. On error
/// the state is left untouched.
pub fn reduce_command(
    state: &mut GroundingState,
    sub: &SubExpression,
    utility: &Asc,
    env: &dyn Environment,
    spec: &AppSpec,
) -> Result<Reduction, ReduceError> {
    let tokens = &state.working.tokens;
    let vars: Vec<&Variable> = sub.vars(&state.working).collect();
    let types: Vec<String> = vars.iter().map(|v| v.ty.clone()).collect();
    let (template_index, (left, right)) = utility
        .templates
        .iter()
        .enumerate()
        .filter(|(_, t)| type_sequence(utility, t) == types)
        .map(|(i, t)| (i, absorption(tokens, sub, t)))
        .fold(None, |best: Option<(usize, (usize, usize))>, cur| match best {
            Some(b) if b.1 .0 + b.1 .1 >= cur.1 .0 + cur.1 .1 => Some(b),
            _ => Some(cur),
        })
        .ok_or(ReduceError::NoTemplate(utility.aid))?;

    let template = &utility.templates[template_index];
    let bound: BTreeMap<&str, &Variable> = template.slots().zip(vars.iter().copied()).collect();
    let arguments: Vec<Binding> = utility.inputs.iter().map(|s| binding(&s.name, bound[s.name.as_str()])).collect();
    let args: Vec<Value> = arguments.iter().map(|b| b.value.clone()).collect();
    let output = env.execute_utility(&utility.api, &args)?;
    if output.is_empty_set() {
        return Err(ReduceError::EmptyResult);
    }

    let out_slot = utility.outputs.first().ok_or(ReduceError::NoTemplate(utility.aid))?;
    let (lo, hi) = (sub.start - left, sub.end + right);
    let mut tokens = tokens.clone();
    let mut next_id = state.next_id;
    let mut fresh = || {
        next_id += 1;
        next_id - 1
    };
    let new_var = Variable {
        name: out_slot.name.clone(),
        ty: out_slot.ty.clone(),
        value: output.clone(),
        surface: surface_of(&tokens[lo..=hi]),
        id: fresh(),
        aliases: Vec::new(),
    };
    let mut buffered = vec![(new_var.id, output.clone())];
    tokens.splice(lo..=hi, [TaggedToken::Var(new_var)]);

    // adjacent references to the same kind of set narrow each other
    let mut pos = lo;
    if spec.is_set_type(&out_slot.ty) {
        for neighbour in [pos.checked_sub(1), Some(pos + 1)].into_iter().flatten() {
            let (a, b) = (neighbour.min(pos), neighbour.max(pos));
            if b >= tokens.len() {
                continue;
            }
            let (Some(x), Some(y)) = (tokens[a].as_var(), tokens[b].as_var()) else { continue };
            if x.ty != y.ty {
                continue;
            }
            let (Value::Ids(p), Value::Ids(q)) = (&x.value, &y.value) else { continue };
            let common: BTreeSet<u64> = p.intersection(q).copied().collect();
            if common.is_empty() {
                return Err(ReduceError::EmptyIntersection);
            }
            let merged = Variable {
                name: out_slot.name.clone(),
                ty: out_slot.ty.clone(),
                value: Value::Ids(common),
                surface: surface_of(&tokens[a..=b]),
                id: fresh(),
                aliases: Vec::new(),
            };
            buffered.push((merged.id, merged.value.clone()));
            tokens.splice(a..=b, [TaggedToken::Var(merged)]);
            pos = a;
        }
    }

    let mut working = TaggedCommand { raw: state.working.raw.clone(), tokens };
    let before_renaming = working.to_string();
    working.rename_dense();

    let fired = FiredUtility { aid: utility.aid, api: utility.api.clone(), arguments, output };
    state.working = working;
    state.next_id = next_id;
    state.output_buffer.extend(buffered);
    state.fired.push(fired.clone());
    Ok(Reduction { template_index, before_renaming, fired })
}

/// Whether some non-stopword of `command` occurs in any template of `asc`.
fn shares_content_word(command: &TaggedCommand, asc: &Asc) -> bool {
    let words: BTreeSet<&str> = asc.templates.iter().flat_map(|t| t.words()).collect();
    command
        .tokens
        .iter()
        .filter_map(TaggedToken::as_word)
        .any(|w| !text::is_stopword(&w.text) && words.contains(w.text.as_str()))
}

fn prepare_subexpressions(command: &TaggedCommand, spec: &AppSpec, scorer: Scorer<'_>) -> Vec<SubExpression> {
    let mut sp = enumerate_subexpressions(command);
    sp.extend(whole_span(command));
    filter_subexpressions(sp, command, spec, scorer).kept
}

/// Grounds `command` to fired utility AIDs plus one action AID.
///
/// Utilities run eagerly against `env` (read-only) so later steps can use
/// their outputs. Every failure mode ends in an empty result with a reason.
pub fn ground(
    engine: &Engine,
    command: &str,
    options: &GroundingOptions,
    env: &dyn Environment,
) -> Result<GroundingResult, GroundError> {
    let spec = engine.spec();
    let action_scorer = engine.scorer(options.matcher, AscKind::Action)?;
    let utility_scorer = engine.scorer(options.matcher, AscKind::Utility)?;
    let tagged = engine.tag(command, options.rephrase)?;

    let mut trace = vec![TraceStep::new(StepKind::Tagged, &tagged)];
    let cap = 4 * (tagged.variable_count() + 1);
    let mut state = GroundingState::new(tagged.clone());
    let mut sp = if options.utilities { prepare_subexpressions(&state.working, spec, action_scorer) } else { Vec::new() };
    let mut fired_pairs: BTreeSet<(usize, Aid)> = BTreeSet::new();
    let mut reductions = 0;
    let mut j = 0;

    let finish = |state: GroundingState, trace: Vec<TraceStep>, action: Option<(ActionCall, f64)>, reason: Option<String>| {
        let mut aid_sequence: Vec<Aid> = Vec::new();
        let (action, score) = match action {
            Some((call, score)) => {
                aid_sequence.extend(state.fired.iter().map(|f| f.aid));
                aid_sequence.push(call.aid);
                (Some(call), Some(score))
            }
            None => (None, None),
        };
        GroundingResult {
            command: command.to_string(),
            aid_sequence,
            action,
            fired: state.fired,
            score,
            tagged: tagged.clone(),
            reduced: state.working,
            trace,
            reason,
            iterations: state.iteration_count,
        }
    };
    let not_grounded = |state: GroundingState, mut trace: Vec<TraceStep>, reason: &str| {
        let mut step = TraceStep::new(StepKind::NotGrounded, &state.working);
        step.note = Some(reason.to_string());
        trace.push(step);
        finish(state, trace, None, Some(reason.to_string()))
    };

    loop {
        state.iteration_count += 1;
        let types = state.working.type_sequence();
        let mut a_set = get_candidate_ascs(spec, AscKind::Action, &types);
        if options.require_word_overlap {
            a_set.retain(|(asc, _)| shares_content_word(&state.working, asc));
        }
        if !a_set.is_empty() {
            let top = rank(&a_set, &state.working.match_tokens(), action_scorer).remove(0);
            if top.score <= options.threshold {
                return Ok(not_grounded(state, trace, "best action score is not above the threshold"));
            }
            let asc = spec.asc(top.aid).expect("ranked action exists");
            let vars: Vec<&Variable> = state.working.variables().collect();
            let bound: BTreeMap<&str, &Variable> =
                asc.templates[top.template_index].slots().zip(vars.iter().copied()).collect();
            let arguments: Vec<Binding> = asc.inputs.iter().map(|s| binding(&s.name, bound[s.name.as_str()])).collect();
            let call = ActionCall { aid: asc.aid, api: asc.api.clone(), arguments };
            let mut step = TraceStep::new(StepKind::Grounded, &state.working);
            step.aid = Some(asc.aid);
            step.api = Some(asc.api.clone());
            step.score = Some(top.score);
            step.bindings = call.arguments.clone();
            trace.push(step);
            return Ok(finish(state, trace, Some((call, top.score)), None));
        }
        if !options.utilities {
            return Ok(not_grounded(state, trace, "no action template fits and utilities are disabled"));
        }
        if j >= sp.len() {
            return Ok(not_grounded(state, trace, "no sub-expression can be reduced"));
        }
        if reductions >= cap {
            return Ok(not_grounded(state, trace, "reduction limit reached"));
        }

        let sub = sp[j].clone();
        let u_set = get_candidate_ascs(spec, AscKind::Utility, &sub.type_sequence(&state.working));
        if u_set.is_empty() {
            j += 1;
            continue;
        }
        let (renamed, _) = rename_for_match(&state.working, &sub);
        let top = rank(&u_set, &renamed.match_tokens(), utility_scorer).remove(0);
        let utility = spec.asc(top.aid).expect("ranked utility exists");
        let ids: Vec<usize> = sub.vars(&state.working).map(|v| v.id).collect();
        let sub_text = sub.render(&state.working);
        if ids.iter().any(|id| fired_pairs.contains(&(*id, utility.aid))) {
            j += 1;
            continue;
        }
        match reduce_command(&mut state, &sub, utility, env, spec) {
            Ok(reduction) => {
                fired_pairs.extend(ids.iter().map(|id| (*id, utility.aid)));
                reductions += 1;
                let mut step = TraceStep::new(StepKind::Reduced, &state.working);
                step.before_renaming = Some(reduction.before_renaming);
                step.sub_expression = Some(sub_text);
                step.aid = Some(utility.aid);
                step.api = Some(utility.api.clone());
                step.score = Some(top.score);
                step.bindings = reduction.fired.arguments;
                trace.push(step);
                sp = prepare_subexpressions(&state.working, spec, action_scorer);
                j = 0;
            }
            Err(e) => {
                let mut step = TraceStep::new(StepKind::ReductionFailed, &state.working);
                step.sub_expression = Some(sub_text);
                step.aid = Some(utility.aid);
                step.api = Some(utility.api.clone());
                step.note = Some(e.to_string());
                trace.push(step);
                j += 1;
            }
        }
    }
}
