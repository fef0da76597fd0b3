//! Natural-language command grounding over API seed commands (ASCs).
//!
//! An application describes its APIs as short natural-language templates
//! with typed slots. Commands are tagged, rephrased toward the template
//! vocabulary, reduced with utility templates that resolve references
//! ("the left of D"), and finally matched to one action API. Commands the
//! engine gets wrong can be taught interactively through [`learner`].

pub mod bundled;
pub mod engine;
pub mod env;
pub mod eval;
pub mod grounder;
pub mod learner;
pub mod matcher;
pub mod spec;
pub mod store;
pub mod tagger;
pub mod text;
pub mod value;

pub use engine::Engine;
pub use env::{EnvError, Environment, World};
pub use grounder::{ground, GroundingOptions, GroundingResult};
pub use matcher::MatcherKind;
pub use spec::{parse_spec, AppSpec, Aid, Asc, AscKind};
pub use store::AscStore;
pub use value::Value;
