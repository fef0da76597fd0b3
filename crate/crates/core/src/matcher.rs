//! Unsupervised scorers ranking ASC templates against a (tagged) command:
//! Jaccard overlap, pooled tf-idf cosine, and averaged word embeddings.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::spec::{Aid, Asc, AscTemplate, TemplateToken};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatcherKind {
    Jaccard,
    Vsm,
    #[serde(alias = "emb")]
    Embedding,
}

impl fmt::Display for MatcherKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatcherKind::Jaccard => "jaccard",
            MatcherKind::Vsm => "vsm",
            MatcherKind::Embedding => "emb",
        })
    }
}

impl FromStr for MatcherKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jaccard" => Ok(MatcherKind::Jaccard),
            "vsm" | "tfidf" => Ok(MatcherKind::Vsm),
            "emb" | "embedding" => Ok(MatcherKind::Embedding),
            other => Err(format!("unknown matcher {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchScore {
    pub aid: Aid,
    pub template_index: usize,
    pub score: f64,
}

/// Tokens a template contributes to matching: its words, and each slot as
/// its type name.
pub fn template_tokens(asc: &Asc, template: &AscTemplate) -> Vec<String> {
    template
        .tokens
        .iter()
        .map(|t| match t {
            TemplateToken::Word(w) => w.clone(),
            TemplateToken::Slot(s) => asc.input(s).map(|slot| slot.ty.clone()).unwrap_or_default(),
        })
        .collect()
}

/// |A ∩ B| / |A ∪ B| over token sets; 0 when both are empty.
pub fn score_jaccard<A: AsRef<str>, B: AsRef<str>>(a: &[A], b: &[B]) -> f64 {
    let a: BTreeSet<&str> = a.iter().map(AsRef::as_ref).collect();
    let b: BTreeSet<&str> = b.iter().map(AsRef::as_ref).collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// tf-idf vector space over one document per API.
///
/// tf is the raw count and idf = ln(N / df); query terms that occur in no
/// document carry no weight.
#[derive(Debug, Clone, Default)]
pub struct VsmIndex {
    idf: BTreeMap<String, f64>,
    docs: BTreeMap<Aid, (BTreeMap<String, f64>, f64)>,
}

fn counts<S: AsRef<str>>(tokens: &[S]) -> BTreeMap<&str, usize> {
    let mut out = BTreeMap::new();
    for t in tokens {
        *out.entry(t.as_ref()).or_insert(0) += 1;
    }
    out
}

impl VsmIndex {
    pub fn new(documents: &BTreeMap<Aid, Vec<String>>) -> Self {
        let n = documents.len() as f64;
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in documents.values() {
            for term in counts(doc).keys() {
                *df.entry(term.to_string()).or_insert(0) += 1;
            }
        }
        let idf: BTreeMap<String, f64> =
            df.into_iter().map(|(t, d)| (t, (n / d as f64).ln())).collect();
        let docs = documents
            .iter()
            .map(|(aid, doc)| {
                let weights: BTreeMap<String, f64> = counts(doc)
                    .into_iter()
                    .map(|(t, c)| (t.to_string(), c as f64 * idf[t]))
                    .collect();
                let norm = weights.values().map(|w| w * w).sum::<f64>().sqrt();
                (*aid, (weights, norm))
            })
            .collect();
        VsmIndex { idf, docs }
    }

    /// One document per API, concatenating the tokens of all its templates.
    pub fn from_ascs<'a>(ascs: impl IntoIterator<Item = &'a Asc>) -> Self {
        let documents = ascs
            .into_iter()
            .map(|a| {
                let doc = a.templates.iter().flat_map(|t| template_tokens(a, t)).collect();
                (a.aid, doc)
            })
            .collect();
        Self::new(&documents)
    }

    pub fn score<S: AsRef<str>>(&self, aid: Aid, query: &[S]) -> f64 {
        let Some((weights, norm)) = self.docs.get(&aid) else { return 0.0 };
        let q: BTreeMap<&str, f64> = counts(query)
            .into_iter()
            .filter_map(|(t, c)| self.idf.get(t).map(|idf| (t, c as f64 * idf)))
            .collect();
        let q_norm = q.values().map(|w| w * w).sum::<f64>().sqrt();
        if q_norm == 0.0 || *norm == 0.0 {
            return 0.0;
        }
        let dot: f64 = q.iter().filter_map(|(t, w)| weights.get(*t).map(|d| d * w)).sum();
        dot / (q_norm * norm)
    }

    pub fn scores<S: AsRef<str>>(&self, query: &[S]) -> BTreeMap<Aid, f64> {
        self.docs.keys().map(|aid| (*aid, self.score(*aid, query))).collect()
    }
}

pub fn score_vsm<S: AsRef<str>>(
    command: &[S],
    api_documents: &BTreeMap<Aid, Vec<String>>,
) -> BTreeMap<Aid, f64> {
    VsmIndex::new(api_documents).scores(command)
}

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("embedding line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("embedding file is empty")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Pre-trained word vectors in the plain-text layout (`token v1 ... vD`).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dimension: usize,
    pub vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize, vectors: HashMap<String, Vec<f64>>) -> Result<Self, EmbeddingError> {
        if dimension == 0 {
            return Err(EmbeddingError::Format { line: 0, message: "dimension must be positive".into() });
        }
        if let Some((token, _)) = vectors.iter().find(|(_, v)| v.len() != dimension) {
            return Err(EmbeddingError::Format {
                line: 0,
                message: format!("vector for {token:?} does not have dimension {dimension}"),
            });
        }
        Ok(EmbeddingTable { dimension, vectors })
    }

    /// The dimension is taken from the first line.
    pub fn parse(source: &str) -> Result<Self, EmbeddingError> {
        let mut dimension = None;
        let mut vectors = HashMap::new();
        for (i, line) in source.lines().enumerate() {
            let mut fields = line.split_whitespace();
            let Some(token) = fields.next() else { continue };
            let values: Result<Vec<f64>, _> = fields.map(f64::from_str).collect();
            let values = values.map_err(|e| EmbeddingError::Format { line: i + 1, message: e.to_string() })?;
            let d = *dimension.get_or_insert(values.len());
            if values.len() != d || d == 0 {
                return Err(EmbeddingError::Format {
                    line: i + 1,
                    message: format!("expected {d} components, found {}", values.len()),
                });
            }
            vectors.insert(token.to_lowercase(), values);
        }
        let dimension = dimension.ok_or(EmbeddingError::Empty)?;
        Ok(EmbeddingTable { dimension, vectors })
    }

    pub fn load(path: &Path) -> Result<Self, EmbeddingError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Mean vector of the in-vocabulary tokens, or `None` if there are none.
    pub fn mean<S: AsRef<str>>(&self, tokens: &[S]) -> Option<Vec<f64>> {
        let mut sum = vec![0.0; self.dimension];
        let mut n = 0usize;
        for v in tokens.iter().filter_map(|t| self.vectors.get(t.as_ref())) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            n += 1;
        }
        (n > 0).then(|| sum.into_iter().map(|s| s / n as f64).collect())
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Cosine of mean word vectors; 0 when either side has no known token.
pub fn score_embedding<A: AsRef<str>, B: AsRef<str>>(
    command: &[A],
    template: &[B],
    table: &EmbeddingTable,
) -> f64 {
    match (table.mean(command), table.mean(template)) {
        (Some(a), Some(b)) => cosine(&a, &b),
        _ => 0.0,
    }
}

/// A scoring backend bound to whatever pooled state it needs.
#[derive(Clone, Copy)]
pub enum Scorer<'a> {
    Jaccard,
    Vsm(&'a VsmIndex),
    Embedding(&'a EmbeddingTable),
}

/// Ranks `(asc, template index)` candidates by descending score, one entry
/// per API. Ties go to the lower AID, then the lower template index.
pub fn rank<S: AsRef<str>>(candidates: &[(&Asc, usize)], query: &[S], scorer: Scorer<'_>) -> Vec<MatchScore> {
    let mut best: BTreeMap<Aid, MatchScore> = BTreeMap::new();
    for &(asc, index) in candidates {
        let score = match scorer {
            Scorer::Vsm(index_) => index_.score(asc.aid, query),
            Scorer::Jaccard => score_jaccard(query, &template_tokens(asc, &asc.templates[index])),
            Scorer::Embedding(table) => {
                score_embedding(query, &template_tokens(asc, &asc.templates[index]), table)
            }
        };
        let entry = best.entry(asc.aid).or_insert(MatchScore { aid: asc.aid, template_index: index, score });
        if score > entry.score || (score == entry.score && index < entry.template_index) {
            *entry = MatchScore { aid: asc.aid, template_index: index, score };
        }
    }
    let mut ranked: Vec<MatchScore> = best.into_values().collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.aid.cmp(&b.aid))
            .then(a.template_index.cmp(&b.template_index))
    });
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::{AscKind, SlotDirection, VariableSlot};

    fn toy_table() -> EmbeddingTable {
        EmbeddingTable::parse("move 1 0 0\nshift 0.9 0.1 0\nremove 0 1 0\n").unwrap()
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(score_jaccard(&["a", "b"], &["b", "a"]), 1.0);
        assert_eq!(
            score_jaccard(&["move", "block_set", "location"], &["shift", "block_set", "location"]),
            0.5
        );
        assert_eq!(score_jaccard(&["a"], &["b"]), 0.0);
        let empty: [&str; 0] = [];
        assert_eq!(score_jaccard(&empty, &empty), 0.0);
    }

    #[test]
    fn vsm_self_similarity_dominates() {
        let docs = BTreeMap::from([
            (1, vec!["move".to_string(), "block_set".into()]),
            (2, vec!["remove".to_string(), "item".into()]),
            (3, vec!["paint".to_string()]),
        ]);
        let s = score_vsm(&["remove", "item"], &docs);
        assert!(s[&2] > s[&1] && s[&2] > s[&3]);
        assert!((s[&2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vsm_zero_overlap_is_zero() {
        let docs = BTreeMap::from([(1, vec!["a".to_string()]), (2, vec!["b".to_string()])]);
        assert!(score_vsm(&["zzz"], &docs).values().all(|s| *s == 0.0));
    }

    #[test]
    fn embedding_examples() {
        let t = toy_table();
        assert!((score_embedding(&["move", "shift"], &["move", "shift"], &t) - 1.0).abs() < 1e-9);
        assert_eq!(score_embedding(&["foo"], &["bar"], &t), 0.0);
        // cos(shift, move) = 0.9/sqrt(0.82) ≈ 0.9939; cos(shift, remove) = 0.1/sqrt(0.82) ≈ 0.1104
        let to_move = score_embedding(&["shift"], &["move"], &t);
        let to_remove = score_embedding(&["shift"], &["remove"], &t);
        assert!((to_move - 0.993_883_7).abs() < 1e-6);
        assert!((to_remove - 0.110_431_5).abs() < 1e-6);
        assert!(to_move > to_remove);
    }

    #[test]
    fn embedding_parse_errors() {
        assert!(matches!(EmbeddingTable::parse(""), Err(EmbeddingError::Empty)));
        assert!(matches!(
            EmbeddingTable::parse("a 1 2\nb 1\n"),
            Err(EmbeddingError::Format { line: 2, .. })
        ));
        assert!(matches!(EmbeddingTable::parse("a x y\n"), Err(EmbeddingError::Format { line: 1, .. })));
    }

    fn asc(aid: Aid, words: &[&str]) -> Asc {
        Asc {
            aid,
            kind: AscKind::Action,
            api: format!("Api{aid}"),
            templates: vec![AscTemplate {
                tokens: words.iter().map(|w| TemplateToken::Word(w.to_string())).collect(),
            }],
            inputs: Vec::<VariableSlot>::new(),
            outputs: Vec::new(),
        }
        .with_direction_check()
    }

    trait Check {
        fn with_direction_check(self) -> Self;
    }
    impl Check for Asc {
        fn with_direction_check(self) -> Self {
            assert!(self.inputs.iter().all(|s| s.direction == SlotDirection::Input));
            self
        }
    }

    #[test]
    fn rank_single_candidate_and_ties() {
        let a = asc(5, &["zzz"]);
        let ranked = rank(&[(&a, 0)], &["move"], Scorer::Jaccard);
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].aid, 5);
        assert_eq!(ranked[0].score, 0.0);

        let b = asc(2, &["move"]);
        let c = asc(1, &["move"]);
        let ranked = rank(&[(&b, 0), (&c, 0)], &["move"], Scorer::Jaccard);
        assert_eq!(ranked.iter().map(|m| m.aid).collect::<Vec<_>>(), [1, 2]);
    }

    #[test]
    fn rank_pools_templates_per_api() {
        let mut a = asc(1, &["x"]);
        a.templates.push(AscTemplate { tokens: vec![TemplateToken::Word("move".into())] });
        let b = asc(2, &["move", "y"]);
        let ranked = rank(&[(&a, 0), (&a, 1), (&b, 0)], &["move"], Scorer::Jaccard);
        assert_eq!(ranked[0], MatchScore { aid: 1, template_index: 1, score: 1.0 });
        assert_eq!(ranked.len(), 2);
    }

    #[test]
    fn matcher_kind_parsing() {
        assert_eq!("emb".parse::<MatcherKind>().unwrap(), MatcherKind::Embedding);
        assert_eq!("VSM".parse::<MatcherKind>().unwrap(), MatcherKind::Vsm);
        assert!("bm25".parse::<MatcherKind>().is_err());
    }
}
