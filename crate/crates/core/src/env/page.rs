use serde::{Deserialize, Serialize};

use super::{Args, EnvError, Environment};
use crate::value::Value;

pub const COLORS: &[&str] = &["red", "green", "brown", "blue", "black"];
pub const TYPES: &[&str] = &["image", "button", "title", "paragraph"];
pub const FONT_SIZES: &[&str] = &["small", "medium", "large"];
pub const GRAPHICS_SIZES: &[&str] = &["height", "width"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageElement {
    pub id: u64,
    #[serde(rename = "type")]
    pub ty: String,
    pub location: (i64, i64),
    #[serde(default = "default_color")]
    pub color: String,
    #[serde(default)]
    pub text: String,
    #[serde(default = "default_font")]
    pub font_size: String,
    #[serde(default = "default_extent")]
    pub height: i64,
    #[serde(default = "default_extent")]
    pub width: i64,
    /// "title 1"-style label, or an image file name.
    pub name: String,
}

fn default_color() -> String {
    "black".into()
}

fn default_font() -> String {
    "medium".into()
}

fn default_extent() -> i64 {
    10
}

/// Html-like elements on a bounded canvas. Elements may overlap.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Page {
    pub width: i64,
    pub height: i64,
    pub elements: Vec<PageElement>,
    pub next_id: u64,
}

impl Default for Page {
    fn default() -> Self {
        Page { width: 100, height: 100, elements: Vec::new(), next_id: 1 }
    }
}

/// Case- and whitespace-insensitive form of an element name.
fn name_key(name: &str) -> String {
    name.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn strip_quotes(s: &str) -> &str {
    let s = s.trim();
    for (open, close) in [('"', '"'), ('“', '”')] {
        if let Some(inner) = s.strip_prefix(open).and_then(|r| r.strip_suffix(close)) {
            return inner;
        }
    }
    s
}

impl Page {
    pub fn element(&self, id: u64) -> Option<&PageElement> {
        self.elements.iter().find(|e| e.id == id)
    }

    pub fn element_named(&self, name: &str) -> Option<&PageElement> {
        let key = name_key(name);
        self.elements.iter().find(|e| name_key(&e.name) == key)
    }

    pub fn in_bounds(&self, (x, y): (i64, i64)) -> bool {
        (0..self.width).contains(&x) && (0..self.height).contains(&y)
    }

    /// Adds an element of `ty`; it is labelled "`ty` N" unless `name` is given.
    pub fn place(&mut self, ty: &str, location: (i64, i64), name: Option<&str>) -> Result<u64, EnvError> {
        if !self.in_bounds(location) {
            return Err(EnvError::OutOfBounds(location.0, location.1));
        }
        let name = match name {
            Some(n) => {
                if self.element_named(n).is_some() {
                    return Err(EnvError::DuplicateName(n.to_string()));
                }
                n.to_string()
            }
            None => {
                let prefix = format!("{ty} ");
                let n = self
                    .elements
                    .iter()
                    .filter_map(|e| name_key(&e.name).strip_prefix(&prefix)?.parse::<u64>().ok())
                    .max()
                    .unwrap_or(0);
                format!("{ty} {}", n + 1)
            }
        };
        let id = self.elements.iter().map(|e| e.id + 1).max().unwrap_or(1).max(self.next_id);
        self.next_id = id + 1;
        self.elements.push(PageElement {
            id,
            ty: ty.to_string(),
            location,
            color: default_color(),
            text: String::new(),
            font_size: default_font(),
            height: default_extent(),
            width: default_extent(),
            name,
        });
        Ok(id)
    }

    fn check_ids(&self, ids: &std::collections::BTreeSet<u64>) -> Result<(), EnvError> {
        match ids.iter().find(|id| self.element(**id).is_none()) {
            Some(id) => Err(EnvError::UnknownId(*id)),
            None => Ok(()),
        }
    }

    fn update(&mut self, ids: &std::collections::BTreeSet<u64>, f: impl Fn(&mut PageElement)) {
        self.elements.iter_mut().filter(|e| ids.contains(&e.id)).for_each(f);
    }

    fn select(&self, pred: impl Fn(&PageElement) -> bool) -> Value {
        Value::Ids(self.elements.iter().filter(|e| pred(e)).map(|e| e.id).collect())
    }

    fn resize(&mut self, api: &str, args: &[Value], f: impl Fn(i64, i64) -> i64) -> Result<(), EnvError> {
        let a = Args::new(api, args, 3)?;
        let (dim, ids, n) = (a.member(0, GRAPHICS_SIZES)?, a.ids(1)?, a.number(2)?);
        self.check_ids(ids)?;
        self.update(ids, |e| {
            let slot = if dim == "height" { &mut e.height } else { &mut e.width };
            *slot = f(*slot, n).max(0);
        });
        Ok(())
    }
}

impl Environment for Page {
    fn execute_action(&mut self, api: &str, args: &[Value]) -> Result<(), EnvError> {
        match api {
            "Add" => {
                let a = Args::new(api, args, 2)?;
                let (ty, cell) = (a.member(0, TYPES)?, a.point(1)?);
                self.place(&ty, cell, None)?;
            }
            "Write" => {
                let a = Args::new(api, args, 2)?;
                let (text, ids) = (a.text(0)?, a.ids(1)?);
                self.check_ids(ids)?;
                let text = strip_quotes(&text).to_string();
                self.update(ids, |e| e.text = text.clone());
            }
            "Remove" => {
                let a = Args::new(api, args, 1)?;
                let ids = a.ids(0)?;
                self.check_ids(ids)?;
                self.elements.retain(|e| !ids.contains(&e.id));
            }
            "Move" => {
                let a = Args::new(api, args, 2)?;
                let (ids, cell) = (a.ids(0)?, a.point(1)?);
                self.check_ids(ids)?;
                if !self.in_bounds(cell) {
                    return Err(EnvError::OutOfBounds(cell.0, cell.1));
                }
                self.update(ids, |e| e.location = cell);
            }
            "MoveByUnits" => {
                let a = Args::new(api, args, 3)?;
                let (ids, dir, units) = (a.ids(0)?, a.direction(1)?, a.number(2)?);
                self.check_ids(ids)?;
                for e in self.elements.iter().filter(|e| ids.contains(&e.id)) {
                    let (x, y) = dir.offset(e.location, units);
                    if !self.in_bounds((x, y)) {
                        return Err(EnvError::OutOfBounds(x, y));
                    }
                }
                self.update(ids, |e| e.location = dir.offset(e.location, units));
            }
            "UpdateColor" => {
                let a = Args::new(api, args, 2)?;
                let (ids, color) = (a.ids(0)?, a.member(1, COLORS)?);
                self.check_ids(ids)?;
                self.update(ids, |e| e.color = color.clone());
            }
            "UpdateFont" => {
                let a = Args::new(api, args, 2)?;
                let (ids, size) = (a.ids(0)?, a.member(1, FONT_SIZES)?);
                self.check_ids(ids)?;
                self.update(ids, |e| e.font_size = size.clone());
            }
            "SetGraphicsSize" => self.resize(api, args, |_, n| n)?,
            "IncreaseSize" => self.resize(api, args, |v, n| v + n)?,
            "DecreaseSize" => self.resize(api, args, |v, n| v - n)?,
            _ => return Err(EnvError::UnknownApi(api.to_string())),
        }
        Ok(())
    }

    fn execute_utility(&self, api: &str, args: &[Value]) -> Result<Value, EnvError> {
        match api {
            "GetElementbyLocation" => {
                let cell = Args::new(api, args, 1)?.point(0)?;
                Ok(self.select(|e| e.location == cell))
            }
            "GetElementbyType" => {
                let ty = Args::new(api, args, 1)?.member(0, TYPES)?;
                Ok(self.select(|e| e.ty == ty))
            }
            "GetElementbyFont" => {
                let size = Args::new(api, args, 1)?.member(0, FONT_SIZES)?;
                Ok(self.select(|e| e.font_size == size))
            }
            "GetElementbyGraphicsSize" => {
                let a = Args::new(api, args, 2)?;
                let (dim, n) = (a.member(0, GRAPHICS_SIZES)?, a.number(1)?);
                Ok(self.select(|e| if dim == "height" { e.height == n } else { e.width == n }))
            }
            "GetElementbyColor" => {
                let color = Args::new(api, args, 1)?.member(0, COLORS)?;
                Ok(self.select(|e| e.color == color))
            }
            "GetElementbyText" => {
                let text = Args::new(api, args, 1)?.text(0)?;
                let text = strip_quotes(&text).to_lowercase();
                Ok(self.select(|e| e.text.to_lowercase() == text))
            }
            "GetElementbyName" => {
                let key = name_key(&Args::new(api, args, 1)?.text(0)?);
                Ok(self.select(|e| name_key(&e.name) == key))
            }
            "GetLocation" => {
                let a = Args::new(api, args, 2)?;
                let (dir, ids) = (a.direction(0)?, a.ids(1)?);
                if ids.len() != 1 {
                    return Err(EnvError::AmbiguousReference(ids.len()));
                }
                let id = *ids.iter().next().expect("one id");
                let e = self.element(id).ok_or(EnvError::UnknownId(id))?;
                let (x, y) = dir.offset(e.location, 1);
                if !self.in_bounds((x, y)) {
                    return Err(EnvError::OutOfBounds(x, y));
                }
                Ok(Value::Point(x, y))
            }
            _ => Err(EnvError::UnknownApi(api.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(s: &str) -> Value {
        Value::Literal(s.into())
    }

    fn ids(ids: &[u64]) -> Value {
        Value::Ids(ids.iter().copied().collect())
    }

    #[test]
    fn add_labels_elements_per_type() {
        let mut p = Page::default();
        p.execute_action("Add", &[lit("title"), lit("(20, 30)")]).unwrap();
        p.execute_action("Add", &[lit("title"), lit("(20, 40)")]).unwrap();
        p.execute_action("Add", &[lit("image"), lit("(30, 40)")]).unwrap();
        let names: Vec<&str> = p.elements.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, ["title 1", "title 2", "image 1"]);
        assert_eq!(p.execute_action("Add", &[lit("title"), lit("(100, 0)")]), Err(EnvError::OutOfBounds(100, 0)));
    }

    #[test]
    fn write_and_find_by_text() {
        let mut p = Page::default();
        let t = p.place("title", (0, 0), None).unwrap();
        p.execute_action("Write", &[lit("\"My Home Page\""), ids(&[t])]).unwrap();
        assert_eq!(p.element(t).unwrap().text, "My Home Page");
        assert_eq!(p.execute_utility("GetElementbyText", &[lit("\"my home page\"")]).unwrap(), ids(&[t]));
    }

    #[test]
    fn sizes() {
        let mut p = Page::default();
        let img = p.place("image", (5, 5), Some("photo.png")).unwrap();
        p.execute_action("SetGraphicsSize", &[lit("height"), ids(&[img]), lit("30")]).unwrap();
        p.execute_action("IncreaseSize", &[lit("height"), ids(&[img]), lit("10")]).unwrap();
        p.execute_action("DecreaseSize", &[lit("width"), ids(&[img]), lit("50")]).unwrap();
        let e = p.element(img).unwrap();
        assert_eq!((e.height, e.width), (40, 0));
        assert_eq!(
            p.execute_utility("GetElementbyGraphicsSize", &[lit("height"), lit("40")]).unwrap(),
            ids(&[img])
        );
    }

    #[test]
    fn name_lookup_is_case_and_space_insensitive() {
        let mut p = Page::default();
        let t = p.place("title", (0, 0), None).unwrap();
        let img = p.place("image", (1, 1), Some("profile.jpeg")).unwrap();
        assert_eq!(p.execute_utility("GetElementbyName", &[lit("Title  1")]).unwrap(), ids(&[t]));
        assert_eq!(p.execute_utility("GetElementbyName", &[lit("profile.jpeg")]).unwrap(), ids(&[img]));
    }

    #[test]
    fn get_location_and_move() {
        let mut p = Page::default();
        let img = p.place("image", (10, 10), None).unwrap();
        assert_eq!(
            p.execute_utility("GetLocation", &[lit("below"), ids(&[img])]).unwrap(),
            Value::Point(10, 11)
        );
        p.execute_action("MoveByUnits", &[ids(&[img]), lit("left"), lit("10")]).unwrap();
        assert_eq!(p.element(img).unwrap().location, (0, 10));
        let before = p.clone();
        assert_eq!(
            p.execute_action("MoveByUnits", &[ids(&[img]), lit("left"), lit("1")]),
            Err(EnvError::OutOfBounds(-1, 10))
        );
        assert_eq!(p, before);
    }
}
