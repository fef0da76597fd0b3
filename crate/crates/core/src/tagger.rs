//! Tagging and rephrasing: maps command spans to typed variables by
//! dictionary lookup and regular expressions, then rewrites words that are
//! outside the ASC vocabulary to in-vocabulary synonyms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::spec::{AppSpec, DomainKind, Rewrite, NUMBER_TYPE};
use crate::text::{self, is_stopword};
use crate::value::Value;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum TagError {
    #[error("empty command")]
    EmptyCommand,
}

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("lexicon line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Word {
    /// Normalized (possibly rephrased) form used for matching.
    pub text: String,
    /// What the user typed; empty for tokens introduced by a multi-word rewrite.
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub value: Value,
    /// Original command text covered by this variable.
    pub surface: String,
    /// Stable identity across renames.
    pub id: usize,
    /// Names this variable carried before, oldest first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaggedToken {
    Word(Word),
    Var(Variable),
}

impl TaggedToken {
    pub fn word(text: &str) -> Self {
        TaggedToken::Word(Word { text: text.to_string(), surface: text.to_string() })
    }

    pub fn as_var(&self) -> Option<&Variable> {
        match self {
            TaggedToken::Var(v) => Some(v),
            TaggedToken::Word(_) => None,
        }
    }

    pub fn as_word(&self) -> Option<&Word> {
        match self {
            TaggedToken::Word(w) => Some(w),
            TaggedToken::Var(_) => None,
        }
    }

    /// Token used by the matchers: the word itself, or a variable's type name.
    pub fn match_token(&self) -> &str {
        match self {
            TaggedToken::Word(w) => &w.text,
            TaggedToken::Var(v) => &v.ty,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedCommand {
    pub raw: String,
    pub tokens: Vec<TaggedToken>,
}

impl TaggedCommand {
    pub fn variables(&self) -> impl Iterator<Item = &Variable> {
        self.tokens.iter().filter_map(TaggedToken::as_var)
    }

    pub fn variable_count(&self) -> usize {
        self.variables().count()
    }

    pub fn type_sequence(&self) -> Vec<String> {
        self.variables().map(|v| v.ty.clone()).collect()
    }

    pub fn match_tokens(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.match_token().to_string()).collect()
    }

    /// Surface form with every variable replaced by its original text.
    pub fn surface_text(&self) -> String {
        self.tokens
            .iter()
            .map(|t| match t {
                TaggedToken::Word(w) => w.surface.as_str(),
                TaggedToken::Var(v) => v.surface.as_str(),
            })
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Renumbers variables X1..Xn left to right, recording previous names.
    pub fn rename_dense(&mut self) {
        let mut next = 1;
        for token in &mut self.tokens {
            if let TaggedToken::Var(v) = token {
                let name = format!("X{next}");
                if v.name != name {
                    let old = std::mem::replace(&mut v.name, name);
                    v.aliases.push(old);
                }
                next += 1;
            }
        }
    }
}

impl fmt::Display for TaggedCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .tokens
            .iter()
            .map(|t| match t {
                TaggedToken::Word(w) => w.text.clone(),
                TaggedToken::Var(v) => format!("{}/{}", v.ty, v.name),
            })
            .collect();
        f.write_str(&parts.join(" "))
    }
}

/// All normalized words appearing in any ASC template.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    pub words: BTreeSet<String>,
}

impl Vocabulary {
    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }
}

pub fn build_vocabulary(spec: &AppSpec) -> Vocabulary {
    let words = spec
        .ascs
        .iter()
        .flat_map(|a| a.templates.iter())
        .flat_map(|t| t.words().map(str::to_string))
        .collect();
    Vocabulary { words }
}

/// Word-or-phrase synonym table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymLexicon {
    pub entries: BTreeMap<String, Vec<String>>,
    max_phrase_len: usize,
}

impl SynonymLexicon {
    pub fn new(entries: BTreeMap<String, Vec<String>>) -> Self {
        let entries: BTreeMap<String, Vec<String>> = entries
            .into_iter()
            .map(|(k, v)| (text::words(&k).join(" "), v))
            .filter(|(k, _)| !k.is_empty())
            .collect();
        let max_phrase_len = entries.keys().map(|k| k.split(' ').count()).max().unwrap_or(0);
        SynonymLexicon { entries, max_phrase_len }
    }

    /// Parses `key<TAB>syn1,syn2,...` lines; blank lines and `#` comments are skipped.
    pub fn parse(source: &str) -> Result<Self, LexiconError> {
        let mut entries: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (i, line) in source.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (key, syns) = line.split_once('\t').ok_or_else(|| LexiconError::Format {
                line: i + 1,
                message: "expected key<TAB>synonyms".into(),
            })?;
            let syns: Vec<String> = syns
                .split(',')
                .map(|s| text::words(s).join(" "))
                .filter(|s| !s.is_empty())
                .collect();
            entries.entry(key.trim().to_lowercase()).or_default().extend(syns);
        }
        Ok(Self::new(entries))
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, phrase: &str) -> Option<&[String]> {
        self.entries.get(phrase).map(Vec::as_slice)
    }
}

struct DomainMatcher {
    ty: String,
    regexes: Vec<(Regex, Option<String>)>,
}

/// Compiled dictionary and pattern tagger for one spec.
pub struct Tagger {
    rewrites: Vec<Rewrite>,
    matchers: Vec<DomainMatcher>,
}

struct Span {
    start: usize,
    end: usize,
    order: usize,
    ty: String,
    value: String,
}

impl Tagger {
    pub fn new(spec: &AppSpec) -> Self {
        let mut matchers = Vec::new();
        for domain in &spec.domains {
            let regexes = match &domain.kind {
                DomainKind::Enumerated { values, aliases } => values
                    .iter()
                    .map(|v| (v.as_str(), v.as_str()))
                    .chain(aliases.iter().map(|(a, v)| (a.as_str(), v.as_str())))
                    .map(|(surface, canonical)| {
                        let body: Vec<String> =
                            surface.split_whitespace().map(regex::escape).collect();
                        let re = Regex::new(&format!(r"(?i)\b{}\b", body.join(r"\s+")))
                            .expect("escaped literal is a valid regex");
                        (re, Some(canonical.to_string()))
                    })
                    .collect(),
                DomainKind::Pattern { regex } => vec![(regex.clone(), None)],
            };
            matchers.push(DomainMatcher { ty: domain.name.clone(), regexes });
        }
        matchers.push(DomainMatcher {
            ty: NUMBER_TYPE.to_string(),
            regexes: vec![(Regex::new(r"\b\d+\b").unwrap(), None)],
        });
        let rewrites = spec.domains.iter().flat_map(|d| d.rewrites.iter().cloned()).collect();
        Tagger { rewrites, matchers }
    }

    /// Applies the spec's rewrite rules (e.g. "row 2 and column 3" → "(2, 3)").
    pub fn normalize(&self, command: &str) -> String {
        self.rewrites.iter().fold(command.trim().to_string(), |text, r| {
            r.pattern.replace_all(&text, r.replace.as_str()).into_owned()
        })
    }

    pub fn tag(&self, command: &str) -> Result<TaggedCommand, TagError> {
        if command.trim().is_empty() {
            return Err(TagError::EmptyCommand);
        }
        let text = self.normalize(command);

        let mut spans = Vec::new();
        for (order, m) in self.matchers.iter().enumerate() {
            for (re, canonical) in &m.regexes {
                for found in re.find_iter(&text) {
                    if found.as_str().trim().is_empty() {
                        continue;
                    }
                    spans.push(Span {
                        start: found.start(),
                        end: found.end(),
                        order,
                        ty: m.ty.clone(),
                        value: canonical.clone().unwrap_or_else(|| found.as_str().trim().to_string()),
                    });
                }
            }
        }
        // longest match first, then earlier domain, then earlier position
        spans.sort_by(|a, b| {
            (b.end - b.start)
                .cmp(&(a.end - a.start))
                .then(a.order.cmp(&b.order))
                .then(a.start.cmp(&b.start))
        });
        let mut accepted: Vec<Span> = Vec::new();
        for span in spans {
            if accepted.iter().all(|a| span.end <= a.start || span.start >= a.end) {
                accepted.push(span);
            }
        }
        accepted.sort_by_key(|s| s.start);

        let mut tokens = Vec::new();
        let mut cursor = 0;
        for (i, span) in accepted.into_iter().enumerate() {
            tokens.extend(text::words(&text[cursor..span.start]).iter().map(|w| TaggedToken::word(w)));
            tokens.push(TaggedToken::Var(Variable {
                name: format!("X{}", i + 1),
                ty: span.ty,
                value: Value::Literal(span.value),
                surface: text[span.start..span.end].trim().to_string(),
                id: i,
                aliases: Vec::new(),
            }));
            cursor = span.end;
        }
        tokens.extend(text::words(&text[cursor..]).iter().map(|w| TaggedToken::word(w)));
        Ok(TaggedCommand { raw: command.to_string(), tokens })
    }
}

pub fn tag_command(command: &str, spec: &AppSpec) -> Result<TaggedCommand, TagError> {
    Tagger::new(spec).tag(command)
}

/// Replaces out-of-vocabulary words and phrases with the first lexicon
/// synonym whose words are all in the vocabulary. Runs to a fixed point, so
/// applying it twice is the same as once.
pub fn rephrase_command(
    tagged: &TaggedCommand,
    vocab: &Vocabulary,
    lexicon: &SynonymLexicon,
) -> TaggedCommand {
    let mut tokens = tagged.tokens.clone();
    let out_of_vocab = |w: &str| !vocab.contains(w) && !is_stopword(w);
    loop {
        let mut changed = false;
        let mut i = 0;
        while i < tokens.len() {
            let mut replaced = None;
            for len in (1..=lexicon.max_phrase_len).rev() {
                if i + len > tokens.len() {
                    continue;
                }
                let words: Option<Vec<&Word>> = tokens[i..i + len].iter().map(TaggedToken::as_word).collect();
                let Some(words) = words else { continue };
                if !words.iter().any(|w| out_of_vocab(&w.text)) {
                    continue;
                }
                let key = words.iter().map(|w| w.text.as_str()).collect::<Vec<_>>().join(" ");
                let Some(synonyms) = lexicon.get(&key) else { continue };
                let Some(synonym) =
                    synonyms.iter().find(|s| s.split(' ').all(|w| vocab.contains(w)))
                else {
                    continue;
                };
                let surface = words
                    .iter()
                    .map(|w| w.surface.as_str())
                    .filter(|s| !s.is_empty())
                    .collect::<Vec<_>>()
                    .join(" ");
                let new: Vec<TaggedToken> = synonym
                    .split(' ')
                    .enumerate()
                    .map(|(k, w)| {
                        TaggedToken::Word(Word {
                            text: w.to_string(),
                            surface: if k == 0 { surface.clone() } else { String::new() },
                        })
                    })
                    .collect();
                replaced = Some((len, new));
                break;
            }
            match replaced {
                Some((len, new)) => {
                    let advance = new.len();
                    tokens.splice(i..i + len, new);
                    i += advance;
                    changed = true;
                }
                None => i += 1,
            }
        }
        if !changed {
            break;
        }
    }
    TaggedCommand { raw: tagged.raw.clone(), tokens }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    fn tagged_string(cmd: &str, spec: &AppSpec) -> String {
        tag_command(cmd, spec).unwrap().to_string()
    }

    #[test]
    fn tags_shape_and_location() {
        let spec = bundled::blocksworld_spec();
        let tagged = tag_command("move the cube to (2,3)", &spec).unwrap();
        assert_eq!(tagged.to_string(), "move the shape/X1 to location/X2");
        let vars: Vec<_> = tagged.variables().collect();
        assert_eq!(vars[0].value, Value::Literal("cube".into()));
        assert_eq!(vars[1].value, Value::Literal("(2,3)".into()));
    }

    #[test]
    fn tags_relocation_command() {
        let spec = bundled::blocksworld_spec();
        let tagged = tag_command("relocate the blue block to the left of D", &spec).unwrap();
        assert_eq!(
            tagged.to_string(),
            "relocate the color/X1 block to the direction/X2 of name/X3"
        );
        let values: Vec<_> = tagged.variables().map(|v| v.value.to_string()).collect();
        assert_eq!(values, ["blue", "left", "D"]);
    }

    #[test]
    fn untagged_command_is_all_words() {
        let spec = bundled::blocksworld_spec();
        let tagged = tag_command("Hello World", &spec).unwrap();
        assert_eq!(tagged.variable_count(), 0);
        assert_eq!(tagged.to_string(), "hello world");
    }

    #[test]
    fn empty_command_rejected() {
        let spec = bundled::blocksworld_spec();
        assert_eq!(tag_command("   ", &spec), Err(TagError::EmptyCommand));
    }

    #[test]
    fn row_column_rewrite() {
        let spec = bundled::blocksworld_spec();
        let tagged = tag_command("add a block at row 2 and column 3", &spec).unwrap();
        assert_eq!(tagged.to_string(), "add a block at location/X1");
        assert_eq!(tagged.variables().next().unwrap().value, Value::Literal("(2, 3)".into()));
    }

    #[test]
    fn article_a_is_not_a_name() {
        let spec = bundled::blocksworld_spec();
        assert_eq!(tagged_string("add a block at (1, 1)", &spec), "add a block at location/X1");
        assert_eq!(tagged_string("rename A to D", &spec), "rename name/X1 to name/X2");
    }

    #[test]
    fn longest_match_wins() {
        let spec = bundled::webpage_spec();
        assert_eq!(tagged_string("remove image 1", &spec), "remove name/X1");
        assert_eq!(tagged_string("remove the image", &spec), "remove the type/X1");
        assert_eq!(
            tagged_string("write \"My Home Page\" on title 1", &spec),
            "write text/X1 on name/X2"
        );
    }

    #[test]
    fn aliases_capture_canonical_value() {
        let spec = bundled::blocksworld_spec();
        let tagged = tag_command("shift green cube down by 3 units", &spec).unwrap();
        assert_eq!(tagged.to_string(), "shift color/X1 shape/X2 direction/X3 by number/X4 units");
        let dir = tagged.variables().nth(2).unwrap();
        assert_eq!(dir.value, Value::Literal("below".into()));
        assert_eq!(dir.surface, "down");
    }

    #[test]
    fn vocabulary_contents() {
        let spec = bundled::blocksworld_spec();
        let v = build_vocabulary(&spec);
        for w in ["move", "shift", "remove", "add", "insert", "rename", "change", "color", "shape", "block", "units"] {
            assert!(v.contains(w), "{w}");
        }
        let spec = bundled::webpage_spec();
        let v = build_vocabulary(&spec);
        for w in ["write", "text", "increase", "decrease", "units"] {
            assert!(v.contains(w), "{w}");
        }
    }

    #[test]
    fn rephrase_relocate_to_move() {
        let spec = bundled::blocksworld_spec();
        let tagged = tag_command("relocate the blue block to the left of D", &spec).unwrap();
        let out = rephrase_command(&tagged, &build_vocabulary(&spec), &bundled::blocksworld_lexicon());
        assert_eq!(out.to_string(), "move the color/X1 block to the direction/X2 of name/X3");
        assert_eq!(out.surface_text(), "relocate the blue block to the left of D");
    }

    #[test]
    fn rephrase_delete_and_phrase() {
        let spec = bundled::blocksworld_spec();
        let vocab = build_vocabulary(&spec);
        let lex = bundled::blocksworld_lexicon();
        let out = rephrase_command(&tag_command("delete blue", &spec).unwrap(), &vocab, &lex);
        assert_eq!(out.to_string(), "remove color/X1");
        let out = rephrase_command(&tag_command("take away blue", &spec).unwrap(), &vocab, &lex);
        assert_eq!(out.to_string(), "remove color/X1");
        assert_eq!(out.surface_text(), "take away blue");
    }

    #[test]
    fn rephrase_fixed_point_on_in_vocab_command() {
        let spec = bundled::blocksworld_spec();
        let tagged = tag_command("move blue to (1, 2)", &spec).unwrap();
        let out = rephrase_command(&tagged, &build_vocabulary(&spec), &bundled::blocksworld_lexicon());
        assert_eq!(out, tagged);
    }

    #[test]
    fn lexicon_parse_errors() {
        assert!(matches!(SynonymLexicon::parse("no tab here"), Err(LexiconError::Format { line: 1, .. })));
        let lex = SynonymLexicon::parse("# comment\n\nTake Away\tremove, delete\n").unwrap();
        assert_eq!(lex.get("take away").unwrap(), ["remove", "delete"]);
    }

    #[test]
    fn rename_dense_records_aliases() {
        let spec = bundled::blocksworld_spec();
        let mut t = tag_command("move A to (1, 1)", &spec).unwrap();
        t.tokens.remove(1);
        t.rename_dense();
        let v = t.variables().next().unwrap();
        assert_eq!(v.name, "X1");
        assert_eq!(v.aliases, ["X2"]);
    }
}
