//! The two reference applications shipped with the crate.

use crate::engine::Engine;
use crate::spec::{parse_spec, AppSpec};
use crate::store::AscStore;
use crate::tagger::SynonymLexicon;

pub const BLOCKSWORLD_SPEC: &str = include_str!("../data/specs/blocksworld.toml");
pub const BLOCKSWORLD_LEXICON: &str = include_str!("../data/specs/blocksworld.lexicon.tsv");
pub const WEBPAGE_SPEC: &str = include_str!("../data/specs/webpage.toml");
pub const WEBPAGE_LEXICON: &str = include_str!("../data/specs/webpage.lexicon.tsv");

pub const NAMES: &[&str] = &["blocksworld", "webpage"];

pub fn blocksworld_spec() -> AppSpec {
    parse_spec(BLOCKSWORLD_SPEC).expect("bundled blocksworld spec is valid")
}

pub fn blocksworld_lexicon() -> SynonymLexicon {
    SynonymLexicon::parse(BLOCKSWORLD_LEXICON).expect("bundled lexicon is valid")
}

pub fn webpage_spec() -> AppSpec {
    parse_spec(WEBPAGE_SPEC).expect("bundled webpage spec is valid")
}

pub fn webpage_lexicon() -> SynonymLexicon {
    SynonymLexicon::parse(WEBPAGE_LEXICON).expect("bundled lexicon is valid")
}

/// Engine for a bundled application by name.
pub fn engine(name: &str) -> Option<Engine> {
    match name {
        "blocksworld" => Some(Engine::new(blocksworld_spec(), blocksworld_lexicon(), None)),
        "webpage" => Some(Engine::new(webpage_spec(), webpage_lexicon(), None)),
        _ => None,
    }
}

/// In-memory ASC store for a bundled application by name.
pub fn store(name: &str) -> Option<AscStore> {
    match name {
        "blocksworld" => Some(AscStore::new(blocksworld_spec(), blocksworld_lexicon(), None)),
        "webpage" => Some(AscStore::new(webpage_spec(), webpage_lexicon(), None)),
        _ => None,
    }
}
