//! Reference applications the grounder drives: a blocks world on a grid and
//! an abstract web page. Coordinates are screen-style with the origin at the
//! top-left: left is −x, right is +x, above is −y, below is +y.

mod blocks;
mod page;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::value::Value;

pub use blocks::{Block, BlocksWorld};
pub use page::{Page, PageElement};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error("({0}, {1}) is outside the grid")]
    OutOfBounds(i64, i64),
    #[error("cell ({0}, {1}) is occupied")]
    CellOccupied(i64, i64),
    #[error("no object with id {0}")]
    UnknownId(u64),
    #[error("name {0:?} is already taken")]
    DuplicateName(String),
    #[error("reference must denote exactly one object, found {0}")]
    AmbiguousReference(usize),
    #[error("unknown API {0:?}")]
    UnknownApi(String),
    #[error("{api} expects {expected} arguments, got {found}")]
    Arity { api: String, expected: usize, found: usize },
    #[error("{api}: {message}")]
    BadArgument { api: String, message: String },
}

/// An application the grounder can query (utilities) and mutate (actions).
pub trait Environment {
    fn execute_action(&mut self, api: &str, args: &[Value]) -> Result<(), EnvError>;
    /// Never mutates the environment.
    fn execute_utility(&self, api: &str, args: &[Value]) -> Result<Value, EnvError>;
}

/// Direction in the screen-style grid convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Left,
    Right,
    Above,
    Below,
}

impl Direction {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" => Some(Direction::Left),
            "right" => Some(Direction::Right),
            "above" | "up" => Some(Direction::Above),
            "below" | "down" => Some(Direction::Below),
            _ => None,
        }
    }

    pub fn offset(self, (x, y): (i64, i64), units: i64) -> (i64, i64) {
        match self {
            Direction::Left => (x - units, y),
            Direction::Right => (x + units, y),
            Direction::Above => (x, y - units),
            Direction::Below => (x, y + units),
        }
    }
}

/// Serializable state of either application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum World {
    Blocks(BlocksWorld),
    Page(Page),
}

impl World {
    /// Empty world for a bundled application name.
    pub fn for_app(app: &str) -> Option<World> {
        match app {
            "blocksworld" => Some(World::Blocks(BlocksWorld::default())),
            "webpage" => Some(World::Page(Page::default())),
            _ => None,
        }
    }

    pub fn object_count(&self) -> usize {
        match self {
            World::Blocks(w) => w.blocks.len(),
            World::Page(p) => p.elements.len(),
        }
    }
}

impl Environment for World {
    fn execute_action(&mut self, api: &str, args: &[Value]) -> Result<(), EnvError> {
        match self {
            World::Blocks(w) => w.execute_action(api, args),
            World::Page(p) => p.execute_action(api, args),
        }
    }

    fn execute_utility(&self, api: &str, args: &[Value]) -> Result<Value, EnvError> {
        match self {
            World::Blocks(w) => w.execute_utility(api, args),
            World::Page(p) => p.execute_utility(api, args),
        }
    }
}

/// Typed views over argument values, shared by both applications.
pub(crate) struct Args<'a> {
    pub api: &'a str,
    pub values: &'a [Value],
}

impl<'a> Args<'a> {
    pub fn new(api: &'a str, values: &'a [Value], expected: usize) -> Result<Self, EnvError> {
        if values.len() != expected {
            return Err(EnvError::Arity { api: api.to_string(), expected, found: values.len() });
        }
        Ok(Args { api, values })
    }

    fn bad(&self, message: impl Into<String>) -> EnvError {
        EnvError::BadArgument { api: self.api.to_string(), message: message.into() }
    }

    pub fn text(&self, i: usize) -> Result<String, EnvError> {
        match &self.values[i] {
            Value::Literal(s) => Ok(s.trim().to_string()),
            other => Err(self.bad(format!("expected text, got {other}"))),
        }
    }

    pub fn ids(&self, i: usize) -> Result<&'a BTreeSet<u64>, EnvError> {
        match &self.values[i] {
            Value::Ids(ids) => Ok(ids),
            other => Err(self.bad(format!("expected an object set, got {other}"))),
        }
    }

    pub fn point(&self, i: usize) -> Result<(i64, i64), EnvError> {
        match &self.values[i] {
            Value::Point(x, y) => Ok((*x, *y)),
            Value::Literal(s) => parse_point(s).ok_or_else(|| self.bad(format!("not a location: {s:?}"))),
            other => Err(self.bad(format!("expected a location, got {other}"))),
        }
    }

    pub fn number(&self, i: usize) -> Result<i64, EnvError> {
        let s = self.text(i)?;
        s.parse().map_err(|_| self.bad(format!("not a number: {s:?}")))
    }

    pub fn direction(&self, i: usize) -> Result<Direction, EnvError> {
        let s = self.text(i)?;
        Direction::parse(&s).ok_or_else(|| self.bad(format!("not a direction: {s:?}")))
    }

    /// Lowercased literal that must belong to `domain`.
    pub fn member(&self, i: usize, domain: &[&str]) -> Result<String, EnvError> {
        let s = self.text(i)?.to_lowercase();
        if domain.contains(&s.as_str()) {
            Ok(s)
        } else {
            Err(self.bad(format!("{s:?} is not one of {domain:?}")))
        }
    }
}

/// Parses "(x, y)" (whitespace-tolerant).
pub fn parse_point(s: &str) -> Option<(i64, i64)> {
    let inner = s.trim().strip_prefix('(')?.strip_suffix(')')?;
    let (x, y) = inner.split_once(',')?;
    Some((x.trim().parse().ok()?, y.trim().parse().ok()?))
}
