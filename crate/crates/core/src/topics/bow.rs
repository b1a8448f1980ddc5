use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::CaptionDocument;
use crate::error::{Error, Result};
use crate::text;

pub const STOPWORDS_VERSION: &str = "en_v1";
const STOPWORDS_EN_V1: &str = include_str!("../../data/stopwords_en_v1.txt");

/// The bundled English stopword list.
pub fn default_stopwords() -> BTreeSet<String> {
    parse_stopwords(STOPWORDS_EN_V1)
}

/// One word per line; `#` starts a comment line.
pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

/// Bag-of-words view of a caption corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowCorpus {
    /// Sorted; a word's id is its index here.
    pub vocabulary: Vec<String>,
    pub doc_ids: Vec<String>,
    /// Sparse `(word_id, count)` per document, ascending word id.
    pub counts: Vec<Vec<(usize, u32)>>,
    /// Documents left empty after filtering.
    pub dropped: Vec<String>,
    pub raw_tokens: usize,
    pub stopword_tokens: usize,
    pub rare_tokens: usize,
}

impl BowCorpus {
    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn doc_len(&self, d: usize) -> usize {
        self.counts[d].iter().map(|&(_, c)| c as usize).sum()
    }

    pub fn total_tokens(&self) -> usize {
        (0..self.n_docs()).map(|d| self.doc_len(d)).sum()
    }

    /// Word ids of document `d` expanded into a token list.
    pub fn tokens(&self, d: usize) -> Vec<usize> {
        self.counts[d].iter().flat_map(|&(w, c)| std::iter::repeat_n(w, c as usize)).collect()
    }
}

/// Concatenate each document's captions, drop stopwords and words whose
/// corpus frequency is below `min_freq`, then drop documents left empty.
pub fn build_bow(docs: &[CaptionDocument], stopwords: &BTreeSet<String>, min_freq: usize) -> Result<BowCorpus> {
    let tokenized: Vec<Vec<String>> = docs.iter().map(|d| text::words(&d.captions.join(" "))).collect();
    let raw_tokens = tokenized.iter().map(Vec::len).sum();
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    let mut stopword_tokens = 0;
    for w in tokenized.iter().flatten() {
        if stopwords.contains(w) {
            stopword_tokens += 1;
        } else {
            *freq.entry(w).or_default() += 1;
        }
    }
    let vocabulary: Vec<String> = freq.iter().filter(|(_, &c)| c >= min_freq).map(|(w, _)| w.to_string()).collect();
    let rare_tokens = freq.values().filter(|&&c| c < min_freq).sum();
    let index: BTreeMap<&str, usize> = vocabulary.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();

    let mut out = BowCorpus {
        vocabulary: Vec::new(),
        doc_ids: Vec::new(),
        counts: Vec::new(),
        dropped: Vec::new(),
        raw_tokens,
        stopword_tokens,
        rare_tokens,
    };
    for (doc, toks) in docs.iter().zip(&tokenized) {
        let mut c: BTreeMap<usize, u32> = BTreeMap::new();
        for t in toks {
            if let Some(&id) = index.get(t.as_str()) {
                *c.entry(id).or_default() += 1;
            }
        }
        if c.is_empty() {
            out.dropped.push(doc.image_id.clone());
        } else {
            out.doc_ids.push(doc.image_id.clone());
            out.counts.push(c.into_iter().collect());
        }
    }
    if out.doc_ids.is_empty() {
        return Err(Error::Degenerate("no document has a word left after filtering".into()));
    }
    out.vocabulary = vocabulary;
    Ok(out)
}
