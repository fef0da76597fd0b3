use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// An argument value flowing between the grounder and an environment.
///
/// Captured command spans stay `Literal` until an environment interprets
/// them; utilities return object-id sets or points.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Value {
    Literal(String),
    Ids(BTreeSet<u64>),
    Point(i64, i64),
}

impl Value {
    pub fn is_empty_set(&self) -> bool {
        matches!(self, Value::Ids(ids) if ids.is_empty())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Literal(s) => f.write_str(s),
            Value::Ids(ids) => {
                let parts: Vec<String> = ids.iter().map(u64::to_string).collect();
                write!(f, "{{{}}}", parts.join(", "))
            }
            Value::Point(x, y) => write!(f, "({x}, {y})"),
        }
    }
}
