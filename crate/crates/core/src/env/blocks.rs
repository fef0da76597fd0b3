use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Args, EnvError, Environment};
use crate::value::Value;

pub const COLORS: &[&str] = &["red", "green", "orange", "blue", "yellow"];
pub const SHAPES: &[&str] = &["triangular", "circular", "cube", "square", "rectangular"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub id: u64,
    pub color: String,
    pub shape: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub location: (i64, i64),
}

/// Tiles on a bounded grid, at most one per cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlocksWorld {
    pub width: i64,
    pub height: i64,
    pub blocks: Vec<Block>,
    /// Lower bound for the next id; ids are never reused.
    pub next_id: u64,
    pub default_color: String,
    pub default_shape: String,
}

impl Default for BlocksWorld {
    fn default() -> Self {
        BlocksWorld {
            width: 10,
            height: 10,
            blocks: Vec::new(),
            next_id: 1,
            default_color: "red".into(),
            default_shape: "square".into(),
        }
    }
}

impl BlocksWorld {
    pub fn block(&self, id: u64) -> Option<&Block> {
        self.blocks.iter().find(|b| b.id == id)
    }

    pub fn block_named(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name.as_deref() == Some(name))
    }

    pub fn block_at(&self, cell: (i64, i64)) -> Option<&Block> {
        self.blocks.iter().find(|b| b.location == cell)
    }

    pub fn in_bounds(&self, (x, y): (i64, i64)) -> bool {
        (0..self.width).contains(&x) && (0..self.height).contains(&y)
    }

    /// Adds a block with explicit attributes (used to seed worlds).
    pub fn place(
        &mut self,
        color: &str,
        shape: &str,
        name: Option<&str>,
        location: (i64, i64),
    ) -> Result<u64, EnvError> {
        self.check_free(location, &BTreeSet::new())?;
        if let Some(n) = name {
            if self.block_named(n).is_some() {
                return Err(EnvError::DuplicateName(n.to_string()));
            }
        }
        let id = self.fresh_id();
        self.blocks.push(Block {
            id,
            color: color.into(),
            shape: shape.into(),
            name: name.map(str::to_string),
            location,
        });
        Ok(id)
    }

    fn fresh_id(&mut self) -> u64 {
        let id = self.blocks.iter().map(|b| b.id + 1).max().unwrap_or(1).max(self.next_id);
        self.next_id = id + 1;
        id
    }

    /// `cell` must be on the grid and not held by a block outside `moving`.
    fn check_free(&self, cell: (i64, i64), moving: &BTreeSet<u64>) -> Result<(), EnvError> {
        if !self.in_bounds(cell) {
            return Err(EnvError::OutOfBounds(cell.0, cell.1));
        }
        match self.block_at(cell) {
            Some(b) if !moving.contains(&b.id) => Err(EnvError::CellOccupied(cell.0, cell.1)),
            _ => Ok(()),
        }
    }

    fn check_ids(&self, ids: &BTreeSet<u64>) -> Result<(), EnvError> {
        match ids.iter().find(|id| self.block(**id).is_none()) {
            Some(id) => Err(EnvError::UnknownId(*id)),
            None => Ok(()),
        }
    }

    fn update(&mut self, ids: &BTreeSet<u64>, f: impl Fn(&mut Block)) {
        self.blocks.iter_mut().filter(|b| ids.contains(&b.id)).for_each(f);
    }

    fn select(&self, pred: impl Fn(&Block) -> bool) -> Value {
        Value::Ids(self.blocks.iter().filter(|b| pred(b)).map(|b| b.id).collect())
    }
}

impl Environment for BlocksWorld {
    fn execute_action(&mut self, api: &str, args: &[Value]) -> Result<(), EnvError> {
        match api {
            "Add" => {
                let a = Args::new(api, args, 1)?;
                let cell = a.point(0)?;
                let (color, shape) = (self.default_color.clone(), self.default_shape.clone());
                self.place(&color, &shape, None, cell)?;
            }
            "Remove" => {
                let a = Args::new(api, args, 1)?;
                let ids = a.ids(0)?;
                self.check_ids(ids)?;
                self.blocks.retain(|b| !ids.contains(&b.id));
            }
            "Move" => {
                let a = Args::new(api, args, 2)?;
                let (ids, cell) = (a.ids(0)?, a.point(1)?);
                self.check_ids(ids)?;
                self.check_free(cell, ids)?;
                match ids.len() {
                    0 => {}
                    1 => self.update(ids, |b| b.location = cell),
                    // several blocks cannot share one cell; nothing moves
                    _ => return Err(EnvError::CellOccupied(cell.0, cell.1)),
                }
            }
            "MoveByUnits" => {
                let a = Args::new(api, args, 3)?;
                let (ids, dir, units) = (a.ids(0)?, a.direction(1)?, a.number(2)?);
                self.check_ids(ids)?;
                let targets: Vec<(u64, (i64, i64))> = self
                    .blocks
                    .iter()
                    .filter(|b| ids.contains(&b.id))
                    .map(|b| (b.id, dir.offset(b.location, units)))
                    .collect();
                for (_, cell) in &targets {
                    self.check_free(*cell, ids)?;
                }
                for (id, cell) in targets {
                    self.update(&BTreeSet::from([id]), |b| b.location = cell);
                }
            }
            "UpdateColor" => {
                let a = Args::new(api, args, 2)?;
                let (ids, color) = (a.ids(0)?, a.member(1, COLORS)?);
                self.check_ids(ids)?;
                self.update(ids, |b| b.color = color.clone());
            }
            "UpdateShape" => {
                let a = Args::new(api, args, 2)?;
                let (ids, shape) = (a.ids(0)?, a.member(1, SHAPES)?);
                self.check_ids(ids)?;
                self.update(ids, |b| b.shape = shape.clone());
            }
            "Rename" => {
                let a = Args::new(api, args, 2)?;
                let (ids, name) = (a.ids(0)?, a.text(1)?);
                self.check_ids(ids)?;
                if ids.len() != 1 {
                    return Err(EnvError::AmbiguousReference(ids.len()));
                }
                if self.blocks.iter().any(|b| b.name.as_deref() == Some(&name) && !ids.contains(&b.id)) {
                    return Err(EnvError::DuplicateName(name));
                }
                self.update(ids, |b| b.name = Some(name.clone()));
            }
            _ => return Err(EnvError::UnknownApi(api.to_string())),
        }
        Ok(())
    }

    fn execute_utility(&self, api: &str, args: &[Value]) -> Result<Value, EnvError> {
        match api {
            "GetBlocksbyColor" => {
                let color = Args::new(api, args, 1)?.text(0)?.to_lowercase();
                Ok(self.select(|b| b.color == color))
            }
            "GetBlocksbyShape" => {
                let shape = Args::new(api, args, 1)?.text(0)?.to_lowercase();
                Ok(self.select(|b| b.shape == shape))
            }
            "GetBlocksbyName" => {
                let name = Args::new(api, args, 1)?.text(0)?;
                Ok(self.select(|b| b.name.as_deref() == Some(name.as_str())))
            }
            "GetBlocksbyLocation" => {
                let cell = Args::new(api, args, 1)?.point(0)?;
                Ok(self.select(|b| b.location == cell))
            }
            "GetLocation" => {
                let a = Args::new(api, args, 2)?;
                let (dir, ids) = (a.direction(0)?, a.ids(1)?);
                if ids.len() != 1 {
                    return Err(EnvError::AmbiguousReference(ids.len()));
                }
                let id = *ids.iter().next().expect("one id");
                let block = self.block(id).ok_or(EnvError::UnknownId(id))?;
                let (x, y) = dir.offset(block.location, 1);
                if !self.in_bounds((x, y)) {
                    return Err(EnvError::OutOfBounds(x, y));
                }
                Ok(Value::Point(x, y))
            }
            _ => Err(EnvError::UnknownApi(api.to_string())),
        }
    }
}
