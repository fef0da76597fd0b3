//! Example commands for every API row of both bundled applications, each
//! grounded on a small seeded world.

use nlground::env::{BlocksWorld, Page, World};
use nlground::{bundled, ground, GroundingOptions, MatcherKind};

fn blocks_world() -> World {
    let mut w = BlocksWorld::default();
    w.place("red", "square", Some("A"), (3, 3)).unwrap();
    w.place("green", "cube", Some("B"), (5, 5)).unwrap();
    w.place("blue", "square", None, (7, 7)).unwrap();
    w.place("orange", "circular", None, (4, 5)).unwrap();
    World::Blocks(w)
}

fn page() -> World {
    let mut p = Page::default();
    let t1 = p.place("title", (10, 10), None).unwrap();
    let t2 = p.place("title", (40, 10), None).unwrap();
    p.place("paragraph", (10, 30), None).unwrap();
    let i1 = p.place("image", (50, 50), None).unwrap();
    p.place("image", (70, 20), None).unwrap();
    p.place("image", (30, 60), Some("profile.jpeg")).unwrap();
    p.place("image", (60, 60), Some("photo.png")).unwrap();
    let b = p.place("button", (80, 80), None).unwrap();
    for e in p.elements.iter_mut() {
        if e.id == t1 {
            e.text = "welcome!".into();
            e.color = "red".into();
        } else if e.id == t2 {
            e.color = "blue".into();
        } else if e.id == i1 {
            e.height = 20;
        } else if e.id == b {
            e.font_size = "large".into();
        }
    }
    World::Page(p)
}

const BLOCKS: &[(&str, &[u32])] = &[
    ("add a block at row 2 and column 3", &[1]),
    ("put a block at (2, 3)", &[1]),
    ("delete blue block", &[8, 2]),
    ("take away blue", &[8, 2]),
    ("move blue block to the left of cube", &[8, 9, 12, 3]),
    ("shift green cube to (4, 6)", &[8, 9, 3]),
    ("move blue block left by 2 units", &[8, 4]),
    ("shift green cube down by 3 units", &[8, 9, 4]),
    ("color A red", &[10, 5]),
    ("change color of B to blue", &[10, 5]),
    ("set the shape of A to cube", &[10, 6]),
    ("make B square", &[10, 6]),
    ("Name the block at (4, 5) as C", &[11, 7]),
    ("rename A to D", &[10, 7]),
    // utility rows, each inside a carrier command
    ("remove the blue block", &[8, 2]),
    ("remove the square block", &[9, 2]),
    ("remove the cube", &[9, 2]),
    ("remove block A", &[10, 2]),
    ("color the block at row 4 and column 5 red", &[11, 5]),
    ("color the block at (4, 5) red", &[11, 5]),
    ("move A to the left of the blue block", &[10, 8, 12, 3]),
    ("move A below block B", &[10, 10, 12, 3]),
];

const PAGE: &[(&str, &[u32])] = &[
    ("add a title at (20, 30)", &[1]),
    ("add an image at (30, 40)", &[1]),
    ("write \"My Home Page\" on title 1", &[18, 2]),
    ("delete title 1", &[18, 3]),
    ("remove image photo.png", &[12, 18, 3]),
    ("move title 1 to (20, 30)", &[18, 4]),
    ("move image 1 left by 10 units", &[18, 5]),
    ("color paragraph 1 as red", &[18, 6]),
    ("change color of title 1 to blue", &[18, 6]),
    ("make title 1 large", &[18, 7]),
    ("set the height of image 1 to 30", &[18, 8]),
    ("set the width of paragraph 1 to 40", &[18, 8]),
    ("increase the height of image 1 by 10 units", &[18, 9]),
    ("reduce the width of image 1 by 5 units", &[18, 10]),
    // utility rows, each inside a carrier command
    ("remove the element at (10, 10)", &[11, 3]),
    ("delete all titles", &[12, 3]),
    ("remove all paragraphs", &[12, 3]),
    ("remove elements having size large", &[13, 3]),
    ("remove elements having height of 20", &[14, 3]),
    ("remove the red element", &[15, 3]),
    ("remove the blue title", &[15, 12, 3]),
    ("remove the element with text \"welcome!\"", &[16, 3]),
    ("move title 1 to the location at the left of image 2", &[18, 18, 17, 4]),
    ("move image 1 to the location below title 1", &[18, 18, 17, 4]),
    ("remove title 1", &[18, 3]),
    ("remove image 2", &[18, 3]),
    ("remove profile.jpeg", &[18, 3]),
];

fn check(app: &str, world: &World, cases: &[(&str, &[u32])]) {
    let engine = bundled::engine(app).unwrap();
    let mut failures = Vec::new();
    for (command, expected) in cases {
        let results: Vec<Vec<u32>> = [MatcherKind::Vsm, MatcherKind::Jaccard]
            .into_iter()
            .map(|m| ground(&engine, command, &GroundingOptions::with_matcher(m), world).unwrap().aid_sequence)
            .collect();
        if results[0] != *expected || results[1] != *expected {
            failures.push(format!("{command:?}: vsm {:?}, jaccard {:?}, expected {expected:?}", results[0], results[1]));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn blocksworld_examples() {
    check("blocksworld", &blocks_world(), BLOCKS);
}

#[test]
fn webpage_examples() {
    check("webpage", &page(), PAGE);
}
