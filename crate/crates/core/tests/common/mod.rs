//! Independent reference implementations and fixtures shared by the
//! property and acceptance suites.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use nlground::env::{BlocksWorld, Page, World};
use proptest::prelude::*;

/// LCS length by trying every subsequence of `a`.
pub fn brute_lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let is_subsequence = |sub: &[&T]| {
        let mut it = b.iter();
        sub.iter().all(|x| it.any(|y| y == *x))
    };
    (0u32..1 << a.len())
        .filter_map(|mask| {
            let sub: Vec<&T> = a.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, x)| x).collect();
            is_subsequence(&sub).then_some(sub.len())
        })
        .max()
        .unwrap_or(0)
}

/// tf-idf cosine computed with dense vectors over the sorted vocabulary.
/// tf = raw count, idf = ln(N / df); 0 when either vector is zero.
pub fn brute_tfidf(docs: &BTreeMap<u32, Vec<String>>, query: &[String]) -> BTreeMap<u32, f64> {
    let vocab: Vec<&String> = docs.values().flatten().collect::<BTreeSet<_>>().into_iter().collect();
    let n = docs.len() as f64;
    let idf: Vec<f64> = vocab
        .iter()
        .map(|t| {
            let df = docs.values().filter(|d| d.contains(t)).count() as f64;
            (n / df).ln()
        })
        .collect();
    let vector = |tokens: &[String]| -> Vec<f64> {
        vocab.iter().zip(&idf).map(|(t, w)| tokens.iter().filter(|x| x == t).count() as f64 * w).collect()
    };
    let q = vector(query);
    docs.iter()
        .map(|(aid, doc)| {
            let d = vector(doc);
            let dot: f64 = q.iter().zip(&d).map(|(a, b)| a * b).sum();
            let nq = q.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nd = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            (*aid, if nq == 0.0 || nd == 0.0 { 0.0 } else { dot / (nq * nd) })
        })
        .collect()
}

/// Brute-force sub-expression spans: every contiguous run of variables
/// shorter than all of them, as (first var index, last var index).
pub fn brute_subexpressions(n: usize) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for i in 0..n {
        for j in i..n {
            if j - i + 1 < n {
                out.insert((i, j));
            }
        }
    }
    out
}

pub fn blocks_world() -> World {
    let mut w = BlocksWorld::default();
    w.place("red", "square", Some("A"), (3, 3)).unwrap();
    w.place("green", "cube", Some("B"), (5, 5)).unwrap();
    w.place("blue", "square", None, (7, 7)).unwrap();
    w.place("orange", "circular", None, (4, 5)).unwrap();
    World::Blocks(w)
}

pub fn relocation_world() -> World {
    let mut w = BlocksWorld::default();
    w.place("blue", "square", None, (7, 7)).unwrap();
    w.place("green", "cube", Some("D"), (3, 4)).unwrap();
    World::Blocks(w)
}

pub fn page() -> World {
    let mut p = Page::default();
    p.place("title", (10, 10), None).unwrap();
    p.place("paragraph", (10, 30), None).unwrap();
    p.place("image", (50, 50), None).unwrap();
    p.place("image", (60, 60), Some("photo.png")).unwrap();
    p.place("button", (80, 80), None).unwrap();
    World::Page(p)
}

const WORDS: &[&str] = &[
    "move", "remove", "add", "insert", "shift", "change", "color", "shape", "rename", "block", "blocks", "to", "the",
    "of", "at", "by", "units", "along", "a", "delete", "put", "make", "set", "write", "text", "on", "increase",
    "decrease", "size", "font", "location", "element", "all", "having", "with", "please", "quickly", "banana", "zzz",
    "and", "then", "it", "get", "rid", "take", "away",
];

const VALUES: &[&str] = &[
    "red", "green", "blue", "orange", "yellow", "black", "brown", "cube", "square", "circular", "triangular", "A", "B",
    "C", "D", "left", "right", "above", "below", "up", "down", "title", "image", "button", "paragraph", "title 1",
    "image 2", "photo.png", "small", "large", "height", "width", "\"hi there\"", "row 2 and column 3",
];

fn value_token() -> BoxedStrategy<String> {
    prop_oneof![
        prop::sample::select(VALUES).prop_map(str::to_string),
        (0i64..12, 0i64..12).prop_map(|(x, y)| format!("({x}, {y})")),
        (0u32..40).prop_map(|n| n.to_string()),
    ]
    .boxed()
}

/// Random words mixed with random domain values.
pub fn fuzz_command() -> impl Strategy<Value = String> {
    prop::collection::vec(prop_oneof![2 => prop::sample::select(WORDS).prop_map(str::to_string), 1 => value_token()], 1..12)
        .prop_map(|tokens| tokens.join(" "))
}

/// Upper bound on grounding iterations for a command with `n` variables:
/// at most 4(n+1) reductions, and between two reductions at most one
/// attempt per sub-expression (including the whole-span fallback).
pub fn iteration_bound(n: usize) -> usize {
    let reductions = 4 * (n + 1);
    let per_round = n * (n + 1) / 2 + 1;
    (reductions + 1) * (per_round + 1) + 1
}
