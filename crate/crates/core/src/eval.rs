//! Accuracy harness over labeled command datasets.
//!
//! Datasets and learner scripts are JSON Lines, one self-contained record per
//! line with the world state inline. A prediction counts as correct when its
//! final action AID equals the gold one; a non-groundable command is correct
//! only when nothing is grounded.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::World;
use crate::grounder::{ground, GroundError, GroundingOptions};
use crate::learner::{option_index, start_session, Answer, Choice, LearnerError, LearnerState};
use crate::matcher::MatcherKind;
use crate::spec::{Aid, AppSpec, AscKind};
use crate::store::AscStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "0-UC")]
    Uc0,
    #[serde(rename = "1-UC")]
    Uc1,
    #[serde(rename = "2-UC")]
    Uc2,
    #[serde(rename = ">2-UC")]
    UcMany,
    #[serde(rename = "NOG")]
    Nog,
}

impl Category {
    pub const ALL: [Category; 5] = [Category::Uc0, Category::Uc1, Category::Uc2, Category::UcMany, Category::Nog];

    pub fn label(self) -> &'static str {
        match self {
            Category::Uc0 => "0-UC",
            Category::Uc1 => "1-UC",
            Category::Uc2 => "2-UC",
            Category::UcMany => ">2-UC",
            Category::Nog => "NOG",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Category from a gold AID sequence: utilities first, the action last.
pub fn categorize(gold: &[Aid]) -> Category {
    match gold.len() {
        0 => Category::Nog,
        1 => Category::Uc0,
        2 => Category::Uc1,
        3 => Category::Uc2,
        _ => Category::UcMany,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCommand {
    pub text: String,
    /// Empty for non-groundable commands.
    pub gold_aids: Vec<Aid>,
    pub category: Category,
    pub initial_world: World,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: {message}")]
    Inconsistent { line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn parse_lines<T: serde::de::DeserializeOwned>(source: &str) -> Result<Vec<(usize, T)>, DatasetError> {
    source
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map(|v| (i + 1, v)).map_err(|source| DatasetError::Json { line: i + 1, source }))
        .collect()
}

fn read(path: &Path) -> Result<String, DatasetError> {
    std::fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })
}

/// Parses a dataset and checks every record against `spec`.
pub fn parse_dataset(source: &str, spec: &AppSpec) -> Result<Vec<LabeledCommand>, DatasetError> {
    let records = parse_lines::<LabeledCommand>(source)?;
    for (line, record) in &records {
        let bad = |message: String| DatasetError::Inconsistent { line: *line, message };
        let expected = categorize(&record.gold_aids);
        if record.category != expected {
            return Err(bad(format!("category {} but gold AIDs {:?} make it {}", record.category, record.gold_aids, expected)));
        }
        if let Some((last, utilities)) = record.gold_aids.split_last() {
            if spec.asc(*last).map(|a| a.kind) != Some(AscKind::Action) {
                return Err(bad(format!("final gold AID {last} is not an action")));
            }
            if let Some(u) = utilities.iter().find(|u| spec.asc(**u).map(|a| a.kind) != Some(AscKind::Utility)) {
                return Err(bad(format!("gold AID {u} is not a utility")));
            }
        }
        if World::for_app(&spec.app_name).map(|w| std::mem::discriminant(&w)) != Some(std::mem::discriminant(&record.initial_world)) {
            return Err(bad(format!("world kind does not belong to {}", spec.app_name)));
        }
    }
    Ok(records.into_iter().map(|(_, r)| r).collect())
}

pub fn load_dataset(path: &Path, spec: &AppSpec) -> Result<Vec<LabeledCommand>, DatasetError> {
    parse_dataset(&read(path)?, spec)
}

/// One scripted user turn in a learner session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ScriptStep {
    Verify { answer: Answer },
    /// Pick the option for this action.
    Choose { aid: Aid },
    ChooseIndex { index: usize },
    Reject { rephrased: Option<String> },
    Confirm { confirmed: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedSession {
    pub command: String,
    pub initial_world: World,
    pub steps: Vec<ScriptStep>,
}

pub fn parse_learner_script(source: &str) -> Result<Vec<ScriptedSession>, DatasetError> {
    Ok(parse_lines(source)?.into_iter().map(|(_, s)| s).collect())
}

pub fn load_learner_script(path: &Path) -> Result<Vec<ScriptedSession>, DatasetError> {
    parse_learner_script(&read(path)?)
}

/// Matcher plus ablation switches, written like `vsm`, `vsm-R`, `jaccard-U`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub matcher: MatcherKind,
    pub rephrase: bool,
    pub utilities: bool,
}

impl Variant {
    pub fn full(matcher: MatcherKind) -> Self {
        Variant { matcher, rephrase: true, utilities: true }
    }

    pub fn options(&self) -> GroundingOptions {
        GroundingOptions { matcher: self.matcher, rephrase: self.rephrase, utilities: self.utilities, ..GroundingOptions::default() }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.matcher)?;
        if !self.rephrase {
            f.write_str("-R")?;
        }
        if !self.utilities {
            f.write_str("-U")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("unknown variant {0:?}; expected e.g. vsm, vsm-R, jaccard-U, emb")]
pub struct VariantError(String);

impl FromStr for Variant {
    type Err = VariantError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || VariantError(s.to_string());
        let compact: String = s.chars().filter(|c| !matches!(c, '(' | ')' | ' ')).collect();
        let mut parts = compact.split('-');
        let matcher: MatcherKind = parts.next().unwrap_or_default().parse().map_err(|_| err())?;
        let mut variant = Variant::full(matcher);
        for flag in parts {
            match flag {
                "R" | "r" => variant.rephrase = false,
                "U" | "u" => variant.utilities = false,
                _ => return Err(err()),
            }
        }
        Ok(variant)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error("learner script, session {index} ({command:?}): {source}")]
    Learner { index: usize, command: String, source: LearnerError },
    #[error("learner script, session {index} ({command:?}): {message}")]
    Script { index: usize, command: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub command: String,
    pub category: Category,
    pub gold: Vec<Aid>,
    pub predicted: Vec<Aid>,
    pub correct: bool,
    /// Whole AID sequence matches, utilities included.
    pub sequence_match: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CategoryStats {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: String,
    pub learner: bool,
    pub learned_templates: usize,
    pub total: usize,
    pub correct: usize,
    pub overall_accuracy: f64,
    pub sequence_accuracy: f64,
    pub per_category: BTreeMap<Category, CategoryStats>,
    /// Incorrect predictions only.
    pub confusion: Vec<EvalRecord>,
    pub records: Vec<EvalRecord>,
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let title = if self.learner { format!("{} + learner", self.variant) } else { self.variant.clone() };
        writeln!(out, "variant: {title}").unwrap();
        writeln!(out, "{:<8} {:>6} {:>8} {:>9}", "category", "total", "correct", "accuracy").unwrap();
        for (cat, s) in &self.per_category {
            writeln!(out, "{:<8} {:>6} {:>8} {:>8.2}%", cat.label(), s.total, s.correct, 100.0 * s.accuracy).unwrap();
        }
        writeln!(out, "{:<8} {:>6} {:>8} {:>8.2}%", "overall", self.total, self.correct, 100.0 * self.overall_accuracy)
            .unwrap();
        writeln!(out, "full-sequence accuracy: {:.2}%", 100.0 * self.sequence_accuracy).unwrap();
        if self.learner {
            writeln!(out, "templates learned: {}", self.learned_templates).unwrap();
        }
        out
    }
}

/// Replays scripted learner sessions against `store`, returning how many
/// ended with a learned template.
pub fn replay_learner(store: &AscStore, sessions: &[ScriptedSession], options: &GroundingOptions) -> Result<usize, EvalError> {
    let mut learned = 0;
    for (index, script) in sessions.iter().enumerate() {
        let learner_err = |source| EvalError::Learner { index, command: script.command.clone(), source };
        let script_err = |message: String| EvalError::Script { index, command: script.command.clone(), message };
        let env = script.initial_world.clone();
        let result = ground(&store.engine(), &script.command, options, &env)?;
        let mut session = start_session(format!("script-{index}"), &script.command, result);
        for step in &script.steps {
            let engine = store.engine();
            match step {
                ScriptStep::Verify { answer } => session.answer_verification(*answer, &engine, options),
                ScriptStep::Choose { aid } => {
                    let i = option_index(&session.options, *aid)
                        .ok_or_else(|| script_err(format!("no option for AID {aid}")))?;
                    session.choose_option(Choice::Index(i), &engine, options, &env)
                }
                ScriptStep::ChooseIndex { index } => session.choose_option(Choice::Index(*index), &engine, options, &env),
                ScriptStep::Reject { rephrased } => {
                    session.choose_option(Choice::Reject { rephrased: rephrased.clone() }, &engine, options, &env)
                }
                ScriptStep::Confirm { confirmed } => session.confirm_arguments(*confirmed, store),
            }
            .map_err(learner_err)?;
        }
        if session.state == LearnerState::DoneLearned {
            learned += 1;
        }
    }
    Ok(learned)
}

/// Scores `dataset` under `variant`. Learner sessions, when given, run first
/// against a private copy of the store, so the caller's store is untouched.
pub fn evaluate(
    store: &AscStore,
    dataset: &[LabeledCommand],
    variant: Variant,
    learner_script: Option<&[ScriptedSession]>,
) -> Result<EvalReport, EvalError> {
    let options = variant.options();
    let scratch = store.snapshot();
    let learned_templates = match learner_script {
        Some(sessions) => replay_learner(&scratch, sessions, &options)?,
        None => 0,
    };
    let engine = scratch.engine();

    let mut records = Vec::with_capacity(dataset.len());
    for item in dataset {
        let predicted = match ground(&engine, &item.text, &options, &item.initial_world) {
            Ok(result) => result.aid_sequence,
            Err(GroundError::Tag(_)) => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let correct = match item.gold_aids.last() {
            Some(gold) => predicted.last() == Some(gold),
            None => predicted.is_empty(),
        };
        records.push(EvalRecord {
            command: item.text.clone(),
            category: item.category,
            gold: item.gold_aids.clone(),
            sequence_match: predicted == item.gold_aids,
            predicted,
            correct,
        });
    }

    let mut per_category: BTreeMap<Category, CategoryStats> = BTreeMap::new();
    for r in &records {
        let s = per_category.entry(r.category).or_default();
        s.total += 1;
        s.correct += r.correct as usize;
    }
    for s in per_category.values_mut() {
        s.accuracy = ratio(s.correct, s.total);
    }
    let correct = records.iter().filter(|r| r.correct).count();
    let sequence = records.iter().filter(|r| r.sequence_match).count();
    Ok(EvalReport {
        variant: variant.to_string(),
        learner: learner_script.is_some(),
        learned_templates,
        total: records.len(),
        correct,
        overall_accuracy: ratio(correct, records.len()),
        sequence_accuracy: ratio(sequence, records.len()),
        per_category,
        confusion: records.iter().filter(|r| !r.correct).cloned().collect(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::env::BlocksWorld;

    fn store() -> AscStore {
        AscStore::new(bundled::blocksworld_spec(), bundled::blocksworld_lexicon(), None)
    }

    fn item(text: &str, gold: Vec<Aid>, world: &World) -> LabeledCommand {
        LabeledCommand { text: text.into(), category: categorize(&gold), gold_aids: gold, initial_world: world.clone() }
    }

    #[test]
    fn categories() {
        assert_eq!(categorize(&[8, 10, 12, 3]), Category::UcMany);
        assert_eq!(categorize(&[1]), Category::Uc0);
        assert_eq!(categorize(&[10, 1]), Category::Uc1);
        assert_eq!(categorize(&[]), Category::Nog);
        assert_eq!(serde_json::to_string(&Category::UcMany).unwrap(), "\">2-UC\"");
    }

    #[test]
    fn variants_parse_and_print() {
        for (text, shown) in [("vsm", "vsm"), ("vsm-R", "vsm-R"), ("fancy-vsm (-U)", ""), ("jaccard-U", "jaccard-U"), ("emb", "emb")] {
            match text.parse::<Variant>() {
                Ok(v) => assert_eq!(v.to_string(), shown),
                Err(_) => assert!(shown.is_empty()),
            }
        }
        assert_eq!("vsm(-U)".parse::<Variant>().unwrap(), Variant { utilities: false, ..Variant::full(MatcherKind::Vsm) });
        assert!("vsm-X".parse::<Variant>().is_err());
    }

    #[test]
    fn single_nog_predicted_empty_scores_one() {
        let world = World::Blocks(BlocksWorld::default());
        let report = evaluate(&store(), &[item("what is the weather today", vec![], &world)], Variant::full(MatcherKind::Vsm), None)
            .unwrap();
        assert_eq!(report.overall_accuracy, 1.0);
        assert_eq!(report.per_category[&Category::Nog].accuracy, 1.0);
    }

    #[test]
    fn utilities_ablation_misses_reductions() {
        let mut w = BlocksWorld::default();
        w.place("red", "square", Some("A"), (3, 3)).unwrap();
        let world = World::Blocks(w);
        let data = [item("remove block A", vec![8, 2], &world), item("add a block at (1, 1)", vec![1], &world)];
        let full = evaluate(&store(), &data, Variant::full(MatcherKind::Vsm), None).unwrap();
        let no_u = evaluate(&store(), &data, "vsm-U".parse().unwrap(), None).unwrap();
        assert_eq!(full.correct, 2);
        assert!(!no_u.records[0].correct);
        assert!(no_u.records[1].correct);
        // overall is the count-weighted mean of the categories
        let weighted: f64 =
            full.per_category.values().map(|s| s.accuracy * s.total as f64).sum::<f64>() / full.total as f64;
        assert!((weighted - full.overall_accuracy).abs() < 1e-12);
        assert!(full.to_table().contains("overall"));
    }

    #[test]
    fn dataset_consistency_is_checked() {
        let spec = bundled::blocksworld_spec();
        let world = serde_json::to_string(&World::Blocks(BlocksWorld::default())).unwrap();
        let good = format!(r#"{{"text":"add a block at (1, 1)","gold_aids":[1],"category":"0-UC","initial_world":{world}}}"#);
        assert_eq!(parse_dataset(&good, &spec).unwrap().len(), 1);
        let wrong_cat = good.replace("0-UC", "1-UC");
        assert!(matches!(parse_dataset(&wrong_cat, &spec), Err(DatasetError::Inconsistent { line: 1, .. })));
        let utility_last = good.replace("[1]", "[8]");
        assert!(matches!(parse_dataset(&utility_last, &spec), Err(DatasetError::Inconsistent { .. })));
        assert!(matches!(parse_dataset("{nope", &spec), Err(DatasetError::Json { line: 1, .. })));
        let page = good.replace("\"blocks\"", "\"page\"");
        assert!(parse_dataset(&page, &spec).is_err());
    }

    #[test]
    fn scripted_learning_stays_private() {
        let mut w = BlocksWorld::default();
        w.place("red", "square", Some("A"), (3, 3)).unwrap();
        let world = World::Blocks(w);
        let script = vec![ScriptedSession {
            command: "put a block to the left of A".into(),
            initial_world: world.clone(),
            steps: vec![
                ScriptStep::Verify { answer: Answer::No },
                ScriptStep::Choose { aid: 1 },
                ScriptStep::Confirm { confirmed: true },
            ],
        }];
        let s = store();
        let data = [item("put a block to the right of A", vec![10, 12, 1], &world)];
        let report = evaluate(&s, &data, Variant::full(MatcherKind::Vsm), Some(&script)).unwrap();
        assert!(report.learner);
        assert_eq!(report.learned_templates, 1);
        assert_eq!(s.learned_count(), 0);
    }
}
