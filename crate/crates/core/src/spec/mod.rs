//! ASC specification model: property domains, action and utility seed
//! commands, and the automatic utility-constraint marker.

mod marker;
mod parse;

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub use marker::{lcs_alignment, mark_utility_constraints, type_sequence};
pub use parse::{parse_learned_templates, parse_spec, parse_template, render_learned_entries};

/// API identifier, unique across one application.
pub type Aid = u32;

/// Built-in argument type recognised by a digit pattern.
pub const NUMBER_TYPE: &str = "number";

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid ASC {aid}: {message}")]
    InvalidAsc { aid: Aid, message: String },
    #[error("invalid spec: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Object,
    Action,
}

/// A regex rewrite applied to the raw command before tagging.
#[derive(Debug, Clone)]
pub struct Rewrite {
    pub pattern: Regex,
    pub replace: String,
}

#[derive(Debug, Clone)]
pub enum DomainKind {
    /// Closed value set; `aliases` maps extra surface forms to a canonical value.
    Enumerated {
        values: Vec<String>,
        aliases: Vec<(String, String)>,
    },
    Pattern {
        regex: Regex,
    },
}

#[derive(Debug, Clone)]
pub struct PropertyDomain {
    pub name: String,
    pub scope: Scope,
    pub kind: DomainKind,
    pub rewrites: Vec<Rewrite>,
}

impl PropertyDomain {
    pub fn is_enumerated(&self) -> bool {
        matches!(self.kind, DomainKind::Enumerated { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AscKind {
    Action,
    Utility,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotDirection {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSlot {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
    /// Utility constraint: the command value bound here must not be reduced.
    pub starred: bool,
    pub direction: SlotDirection,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TemplateToken {
    Word(String),
    Slot(String),
}

/// One natural-language paraphrase of an ASC.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AscTemplate {
    pub tokens: Vec<TemplateToken>,
}

impl AscTemplate {
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().filter_map(|t| match t {
            TemplateToken::Word(w) => Some(w.as_str()),
            TemplateToken::Slot(_) => None,
        })
    }

    pub fn slots(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().filter_map(|t| match t {
            TemplateToken::Slot(s) => Some(s.as_str()),
            TemplateToken::Word(_) => None,
        })
    }

    /// Renders back to slot syntax, e.g. `move {X1:block_set} to {X2:location}`.
    pub fn to_source(&self, asc: &Asc) -> String {
        self.tokens
            .iter()
            .map(|t| match t {
                TemplateToken::Word(w) => w.clone(),
                TemplateToken::Slot(s) => {
                    let ty = asc.input(s).map(|slot| slot.ty.as_str()).unwrap_or("?");
                    format!("{{{s}:{ty}}}")
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// One API seed command: an API bound to one or more NL templates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Asc {
    pub aid: Aid,
    pub kind: AscKind,
    pub api: String,
    pub templates: Vec<AscTemplate>,
    pub inputs: Vec<VariableSlot>,
    pub outputs: Vec<VariableSlot>,
}

impl Asc {
    pub fn input(&self, name: &str) -> Option<&VariableSlot> {
        self.inputs.iter().find(|s| s.name == name)
    }

    pub fn output_type(&self) -> Option<&str> {
        self.outputs.first().map(|s| s.ty.as_str())
    }

    pub fn starred_slots(&self) -> impl Iterator<Item = &VariableSlot> {
        self.inputs.iter().filter(|s| s.starred)
    }

    /// Checks that `template` uses every declared input slot exactly once.
    pub fn check_template(&self, template: &AscTemplate) -> Result<(), SpecError> {
        if template.tokens.is_empty() {
            return Err(self.invalid("empty template"));
        }
        let used: Vec<&str> = template.slots().collect();
        let unique: BTreeSet<&str> = used.iter().copied().collect();
        if unique.len() != used.len() {
            return Err(self.invalid("template repeats a slot"));
        }
        let declared: BTreeSet<&str> = self.inputs.iter().map(|s| s.name.as_str()).collect();
        if unique != declared {
            return Err(self.invalid(format!(
                "template slots {:?} do not match declared inputs {:?}",
                unique, declared
            )));
        }
        Ok(())
    }

    fn invalid(&self, message: impl Into<String>) -> SpecError {
        SpecError::InvalidAsc { aid: self.aid, message: message.into() }
    }
}

/// The full ASC specification of one application.
#[derive(Debug, Clone)]
pub struct AppSpec {
    pub app_name: String,
    pub set_types: Vec<String>,
    pub domains: Vec<PropertyDomain>,
    pub ascs: Vec<Asc>,
    pub synonym_lexicon_path: Option<PathBuf>,
    pub embedding_path: Option<PathBuf>,
}

impl AppSpec {
    pub fn asc(&self, aid: Aid) -> Option<&Asc> {
        self.ascs.iter().find(|a| a.aid == aid)
    }

    pub fn domain(&self, name: &str) -> Option<&PropertyDomain> {
        self.domains.iter().find(|d| d.name == name)
    }

    pub fn actions(&self) -> impl Iterator<Item = &Asc> {
        self.ascs.iter().filter(|a| a.kind == AscKind::Action)
    }

    pub fn utilities(&self) -> impl Iterator<Item = &Asc> {
        self.ascs.iter().filter(|a| a.kind == AscKind::Utility)
    }

    pub fn pool(&self, kind: AscKind) -> impl Iterator<Item = &Asc> {
        self.ascs.iter().filter(move |a| a.kind == kind)
    }

    pub fn is_set_type(&self, ty: &str) -> bool {
        self.set_types.iter().any(|t| t == ty)
    }

    pub fn is_known_type(&self, ty: &str) -> bool {
        ty == NUMBER_TYPE || self.is_set_type(ty) || self.domain(ty).is_some()
    }

    /// Set of `(aid, slot)` pairs currently carrying a utility constraint.
    pub fn starred_set(&self) -> BTreeSet<(Aid, String)> {
        self.actions()
            .flat_map(|a| a.starred_slots().map(move |s| (a.aid, s.name.clone())))
            .collect()
    }

    /// Checks every cross-ASC invariant.
    pub fn validate(&self) -> Result<(), SpecError> {
        if self.actions().next().is_none() {
            return Err(SpecError::Invalid("no action ASCs".into()));
        }
        let mut seen = BTreeSet::new();
        for asc in &self.ascs {
            if !seen.insert(asc.aid) {
                return Err(asc.invalid("duplicate AID"));
            }
            if asc.aid == 0 {
                return Err(asc.invalid("AID 0 is reserved for non-groundable commands"));
            }
            match asc.kind {
                AscKind::Action if !asc.outputs.is_empty() => {
                    return Err(asc.invalid("action ASCs have no outputs"))
                }
                AscKind::Utility if asc.outputs.is_empty() => {
                    return Err(asc.invalid("utility ASCs need an output"))
                }
                _ => {}
            }
            if asc.templates.is_empty() {
                return Err(asc.invalid("no templates"));
            }
            let mut names = BTreeSet::new();
            for slot in asc.inputs.iter().chain(&asc.outputs) {
                if !names.insert(slot.name.as_str()) {
                    return Err(asc.invalid(format!("slot {} declared twice", slot.name)));
                }
                if !self.is_known_type(&slot.ty) {
                    return Err(asc.invalid(format!("undeclared type {:?}", slot.ty)));
                }
            }
            for template in &asc.templates {
                asc.check_template(template)?;
            }
        }
        for domain in &self.domains {
            if let DomainKind::Enumerated { values, .. } = &domain.kind {
                let unique: BTreeSet<_> = values.iter().collect();
                if values.is_empty() || unique.len() != values.len() {
                    return Err(SpecError::Invalid(format!(
                        "domain {} must be non-empty and duplicate-free",
                        domain.name
                    )));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for AscKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AscKind::Action => "action",
            AscKind::Utility => "utility",
        })
    }
}
