//! Word n-gram (n = 1, 2, 3) bag-of-words vocabularies and count vectors.
//!
//! Text is lowercased and split on whitespace. N-grams never span two texts.
//! Vocabulary order is descending corpus count, then byte-wise lexicographic
//! n-gram, so fitting does not depend on corpus order.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MAX_N: usize = 3;
pub const DEFAULT_MIN_COUNT: usize = 2;
pub const DEFAULT_MAX_SIZE: usize = 10_000;
/// Prefix applied to n-grams when they become design-matrix column names.
pub const COLUMN_PREFIX: &str = "bow:";

pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

/// Calls `f` on every contiguous 1..=3-gram, joined by single spaces.
fn for_each_ngram(tokens: &[String], mut f: impl FnMut(String, usize)) {
    for start in 0..tokens.len() {
        for n in 1..=MAX_N.min(tokens.len() - start) {
            f(tokens[start..start + n].join(" "), n);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub ngram: String,
    pub n: usize,
    pub count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BowVocab {
    entries: Vec<VocabEntry>,
    index: HashMap<String, usize>,
}

impl BowVocab {
    pub fn from_entries(entries: Vec<VocabEntry>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            let tokens = e.ngram.split(' ').count();
            if e.ngram.is_empty() || !(1..=MAX_N).contains(&e.n) || tokens != e.n {
                return Err(Error::InvalidArgument(format!(
                    "malformed vocabulary entry {:?}",
                    e.ngram
                )));
            }
            if index.insert(e.ngram.clone(), i).is_some() {
                return Err(Error::DuplicateId(e.ngram.clone()));
            }
        }
        Ok(BowVocab { entries, index })
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, ngram: &str) -> Option<usize> {
        self.index.get(ngram).copied()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|e| format!("{COLUMN_PREFIX}{}", e.ngram))
            .collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let entries: Vec<VocabEntry> =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e))?;
        Self::from_entries(entries)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string(&self.entries).expect("vocab serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

pub fn fit_vocab<S: AsRef<str>>(
    corpus: &[S],
    min_count: usize,
    max_size: usize,
) -> Result<BowVocab> {
    if min_count < 1 || max_size < 1 {
        return Err(Error::InvalidArgument(
            "min_count and max_size must be at least 1".into(),
        ));
    }
    let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
    for text in corpus {
        for_each_ngram(&tokenize(text.as_ref()), |g, n| {
            counts.entry(g).or_insert((0, n)).0 += 1;
        });
    }
    let mut entries: Vec<VocabEntry> = counts
        .into_iter()
        .filter(|(_, (c, _))| *c >= min_count)
        .map(|(ngram, (count, n))| VocabEntry { ngram, n, count })
        .collect();
    entries.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.ngram.cmp(&b.ngram)));
    entries.truncate(max_size);
    BowVocab::from_entries(entries)
}

/// Sparse n-gram counts, sorted by vocabulary index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BowVector(pub Vec<(usize, usize)>);

impl BowVector {
    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for &(i, c) in &self.0 {
            out[i] = c as f64;
        }
        out
    }
}

pub fn vectorize(text: &str, vocab: &BowVocab) -> BowVector {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for_each_ngram(&tokenize(text), |g, _| {
        if let Some(i) = vocab.index_of(&g) {
            *counts.entry(i).or_default() += 1;
        }
    });
    let mut pairs: Vec<(usize, usize)> = counts.into_iter().collect();
    pairs.sort_unstable();
    BowVector(pairs)
}

pub fn vectorize_batch<S: AsRef<str> + Sync>(texts: &[S], vocab: &BowVocab) -> Vec<BowVector> {
    crate::par::map(texts, |t| vectorize(t.as_ref(), vocab))
}
