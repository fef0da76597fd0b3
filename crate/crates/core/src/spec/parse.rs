use std::collections::BTreeMap;
use std::path::PathBuf;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{
    mark_utility_constraints, Aid, AppSpec, Asc, AscKind, AscTemplate, DomainKind,
    PropertyDomain, Rewrite, Scope, SlotDirection, SpecError, TemplateToken, VariableSlot,
};
use crate::text;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    app: RawApp,
    #[serde(default)]
    domains: Vec<RawDomain>,
    #[serde(default)]
    action_ascs: Vec<RawAsc>,
    #[serde(default)]
    utility_ascs: Vec<RawAsc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawApp {
    name: String,
    #[serde(default)]
    set_types: Vec<String>,
    lexicon: Option<String>,
    embeddings: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    name: String,
    #[serde(default = "default_scope")]
    scope: Scope,
    values: Option<Vec<String>>,
    pattern: Option<String>,
    #[serde(default)]
    aliases: BTreeMap<String, String>,
    #[serde(default)]
    rewrites: Vec<RawRewrite>,
}

fn default_scope() -> Scope {
    Scope::Object
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRewrite {
    pattern: String,
    replace: String,
}

/// One ASC entry as written on disk; shared with the learned-template sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawAsc {
    pub aid: Aid,
    pub api: String,
    pub templates: Vec<String>,
    #[serde(default)]
    pub args: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub outputs: BTreeMap<String, String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub(crate) struct RawLearned {
    #[serde(default)]
    pub action_ascs: Vec<RawAsc>,
}

/// Parses and validates a spec document, then recomputes utility constraints.
pub fn parse_spec(source: &str) -> Result<AppSpec, SpecError> {
    if source.trim().is_empty() {
        return Err(SpecError::Syntax { line: 1, message: "empty document".into() });
    }
    let raw: RawSpec = toml::from_str(source).map_err(|e| syntax_error(source, &e))?;

    let mut domains = Vec::with_capacity(raw.domains.len());
    for d in raw.domains {
        domains.push(build_domain(d)?);
    }

    let mut ascs = Vec::new();
    for (kind, entries) in [(AscKind::Action, raw.action_ascs), (AscKind::Utility, raw.utility_ascs)] {
        for entry in entries {
            ascs.push(build_asc(kind, &entry)?);
        }
    }

    let spec = AppSpec {
        app_name: raw.app.name,
        set_types: raw.app.set_types,
        domains,
        ascs,
        synonym_lexicon_path: raw.app.lexicon.map(PathBuf::from),
        embedding_path: raw.app.embeddings.map(PathBuf::from),
    };
    spec.validate()?;
    Ok(mark_utility_constraints(&spec))
}

fn syntax_error(source: &str, e: &toml::de::Error) -> SpecError {
    let line = e
        .span()
        .map(|span| source[..span.start.min(source.len())].matches('\n').count() + 1)
        .unwrap_or(1);
    SpecError::Syntax { line, message: e.message().to_string() }
}

fn build_domain(d: RawDomain) -> Result<PropertyDomain, SpecError> {
    let invalid = |m: String| SpecError::Invalid(format!("domain {}: {m}", d.name));
    let kind = match (&d.values, &d.pattern) {
        (Some(values), None) => {
            let values: Vec<String> = values.iter().map(|v| v.trim().to_lowercase()).collect();
            let mut aliases = Vec::new();
            for (alias, canonical) in &d.aliases {
                let canonical = canonical.to_lowercase();
                if !values.contains(&canonical) {
                    return Err(invalid(format!("alias {alias:?} targets unknown value {canonical:?}")));
                }
                aliases.push((alias.to_lowercase(), canonical));
            }
            DomainKind::Enumerated { values, aliases }
        }
        (None, Some(pattern)) => {
            if !d.aliases.is_empty() {
                return Err(invalid("aliases require an enumerated domain".into()));
            }
            let regex = Regex::new(pattern).map_err(|e| invalid(e.to_string()))?;
            DomainKind::Pattern { regex }
        }
        _ => return Err(invalid("exactly one of `values` or `pattern` is required".into())),
    };
    let mut rewrites = Vec::new();
    for r in &d.rewrites {
        let pattern = Regex::new(&r.pattern).map_err(|e| invalid(e.to_string()))?;
        rewrites.push(Rewrite { pattern, replace: r.replace.clone() });
    }
    Ok(PropertyDomain { name: d.name, scope: d.scope, kind, rewrites })
}

fn slot_order(name: &str) -> (u32, String) {
    let digits: String = name.chars().skip_while(|c| !c.is_ascii_digit()).collect();
    (digits.parse().unwrap_or(u32::MAX), name.to_string())
}

fn slots(
    map: &BTreeMap<String, String>,
    direction: SlotDirection,
) -> Vec<VariableSlot> {
    let mut out: Vec<VariableSlot> = map
        .iter()
        .map(|(name, ty)| VariableSlot {
            name: name.clone(),
            ty: ty.trim().trim_end_matches('*').to_string(),
            starred: false,
            direction,
        })
        .collect();
    out.sort_by_key(|s| slot_order(&s.name));
    out
}

pub(crate) fn build_asc(kind: AscKind, entry: &RawAsc) -> Result<Asc, SpecError> {
    let mut asc = Asc {
        aid: entry.aid,
        kind,
        api: entry.api.clone(),
        templates: Vec::new(),
        inputs: slots(&entry.args, SlotDirection::Input),
        outputs: slots(&entry.outputs, SlotDirection::Output),
    };
    for source in &entry.templates {
        let template = parse_template(source, &asc)?;
        asc.templates.push(template);
    }
    Ok(asc)
}

/// Expands slot syntax (`{X1:type}`, `{X1}`) into template tokens, checking
/// slot types against the ASC's declared inputs.
pub fn parse_template(source: &str, asc: &Asc) -> Result<AscTemplate, SpecError> {
    let invalid = |message: String| SpecError::InvalidAsc { aid: asc.aid, message };
    let mut tokens = Vec::new();
    let mut rest = source;
    while let Some(open) = rest.find('{') {
        tokens.extend(text::words(&rest[..open]).into_iter().map(TemplateToken::Word));
        let close = rest[open..]
            .find('}')
            .map(|i| open + i)
            .ok_or_else(|| invalid(format!("unclosed slot in {source:?}")))?;
        let body = &rest[open + 1..close];
        let (name, ty) = match body.split_once(':') {
            Some((n, t)) => (n.trim(), Some(t.trim().trim_end_matches('*'))),
            None => (body.trim(), None),
        };
        let slot = asc
            .input(name)
            .ok_or_else(|| invalid(format!("slot {name} is not a declared input")))?;
        if let Some(ty) = ty {
            if ty != slot.ty {
                return Err(invalid(format!("slot {name} typed {ty} but declared {}", slot.ty)));
            }
        }
        tokens.push(TemplateToken::Slot(name.to_string()));
        rest = &rest[close + 1..];
    }
    tokens.extend(text::words(rest).into_iter().map(TemplateToken::Word));
    let template = AscTemplate { tokens };
    asc.check_template(&template)?;
    Ok(template)
}

/// Serializes learned action templates in the spec file's ASC entry syntax.
pub fn render_learned_entries(spec: &AppSpec, learned: &BTreeMap<Aid, Vec<AscTemplate>>) -> String {
    let entries = learned
        .iter()
        .filter_map(|(aid, templates)| {
            let asc = spec.asc(*aid)?;
            Some(RawAsc {
                aid: *aid,
                api: asc.api.clone(),
                templates: templates.iter().map(|t| t.to_source(asc)).collect(),
                args: asc.inputs.iter().map(|s| (s.name.clone(), s.ty.clone())).collect(),
                outputs: BTreeMap::new(),
            })
        })
        .collect();
    toml::to_string(&RawLearned { action_ascs: entries }).unwrap_or_default()
}

/// Parses a learned-template sidecar against `spec`, returning the extra
/// templates per action AID.
pub fn parse_learned_templates(source: &str, spec: &AppSpec) -> Result<BTreeMap<Aid, Vec<AscTemplate>>, SpecError> {
    let mut out: BTreeMap<Aid, Vec<AscTemplate>> = BTreeMap::new();
    if source.trim().is_empty() {
        return Ok(out);
    }
    let raw: RawLearned = toml::from_str(source).map_err(|e| syntax_error(source, &e))?;
    for entry in raw.action_ascs {
        let asc = spec
            .asc(entry.aid)
            .filter(|a| a.kind == AscKind::Action)
            .ok_or_else(|| SpecError::InvalidAsc { aid: entry.aid, message: "not an action ASC".into() })?;
        if asc.api != entry.api {
            return Err(SpecError::InvalidAsc {
                aid: entry.aid,
                message: format!("learned entry names API {} but the spec has {}", entry.api, asc.api),
            });
        }
        for source in &entry.templates {
            out.entry(entry.aid).or_default().push(parse_template(source, asc)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINI: &str = r#"
[app]
name = "mini"
set_types = ["block_set"]

[[domains]]
name = "color"
values = ["red", "blue"]

[[action_ascs]]
aid = 1
api = "Remove"
templates = ["remove {X1:block_set}"]
args = { X1 = "block_set" }
"#;

    #[test]
    fn parses_minimal_spec() {
        let spec = parse_spec(MINI).unwrap();
        assert_eq!(spec.app_name, "mini");
        assert_eq!(spec.ascs.len(), 1);
        let t = &spec.ascs[0].templates[0];
        assert_eq!(
            t.tokens,
            vec![TemplateToken::Word("remove".into()), TemplateToken::Slot("X1".into())]
        );
        assert!(spec.starred_set().is_empty());
    }

    #[test]
    fn empty_document_is_a_syntax_error() {
        assert!(matches!(parse_spec(""), Err(SpecError::Syntax { line: 1, .. })));
        assert!(matches!(parse_spec("  \n"), Err(SpecError::Syntax { .. })));
    }

    #[test]
    fn malformed_document_reports_line() {
        let src = "[app]\nname = \"x\"\n[[domains]\n";
        match parse_spec(src) {
            Err(SpecError::Syntax { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_aid_rejected() {
        let src = format!(
            "{MINI}\n[[action_ascs]]\naid = 1\napi = \"Other\"\ntemplates = [\"other {{X1}}\"]\nargs = {{ X1 = \"color\" }}\n"
        );
        assert!(matches!(parse_spec(&src), Err(SpecError::InvalidAsc { aid: 1, .. })));
    }

    #[test]
    fn undeclared_type_rejected() {
        let src = MINI.replace("args = { X1 = \"block_set\" }", "args = { X1 = \"widget\" }")
            .replace("{X1:block_set}", "{X1}");
        assert!(matches!(parse_spec(&src), Err(SpecError::InvalidAsc { aid: 1, .. })));
    }

    #[test]
    fn template_slot_mismatch_rejected() {
        let src = MINI.replace("remove {X1:block_set}", "remove {X2:block_set}");
        assert!(matches!(parse_spec(&src), Err(SpecError::InvalidAsc { aid: 1, .. })));
        let src = MINI.replace("remove {X1:block_set}", "remove it");
        assert!(matches!(parse_spec(&src), Err(SpecError::InvalidAsc { aid: 1, .. })));
        let src = MINI.replace("remove {X1:block_set}", "remove {X1:color}");
        assert!(matches!(parse_spec(&src), Err(SpecError::InvalidAsc { aid: 1, .. })));
    }

    #[test]
    fn starred_flags_in_file_are_ignored() {
        let src = MINI.replace("{X1:block_set}", "{X1:block_set*}");
        let spec = parse_spec(&src).unwrap();
        assert!(spec.starred_set().is_empty());
    }

    #[test]
    fn no_action_asc_is_invalid() {
        let src = "[app]\nname = \"x\"\n";
        assert!(matches!(parse_spec(src), Err(SpecError::Invalid(_))));
    }

    #[test]
    fn bad_pattern_rejected() {
        let src = format!("{MINI}\n[[domains]]\nname = \"loc\"\npattern = '(('\n");
        assert!(matches!(parse_spec(&src), Err(SpecError::Invalid(_))));
    }

    #[test]
    fn learned_entries_round_trip() {
        let spec = parse_spec(MINI).unwrap();
        let asc = spec.asc(1).unwrap();
        let t = parse_template("delete {X1:block_set} now", asc).unwrap();
        let text = render_learned_entries(&spec, &BTreeMap::from([(1, vec![t.clone()])]));
        assert!(text.contains("delete {X1:block_set} now"));
        let parsed = parse_learned_templates(&text, &spec).unwrap();
        assert_eq!(parsed, BTreeMap::from([(1, vec![t])]));
    }

    #[test]
    fn learned_entries_must_name_existing_actions() {
        let spec = parse_spec(MINI).unwrap();
        let bad = "[[action_ascs]]\naid = 9\napi = \"Remove\"\ntemplates = [\"x {X1}\"]\nargs = { X1 = \"block_set\" }\n";
        assert!(matches!(parse_learned_templates(bad, &spec), Err(SpecError::InvalidAsc { aid: 9, .. })));
        assert!(parse_learned_templates("", &spec).unwrap().is_empty());
    }
}
