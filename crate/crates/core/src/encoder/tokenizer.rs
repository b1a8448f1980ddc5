use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::text::split_words;

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const CLS_ID: usize = 2;
pub const SEP_ID: usize = 3;

const SPECIALS: [&str; 4] = [PAD, UNK, CLS, SEP];

/// Word-level tokenizer with a frequency-thresholded vocabulary.
///
/// Ids 0..4 are the special tokens; words follow in lexicographic order so the
/// vocabulary is a pure function of the training text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tokenizer {
    pub lowercase: bool,
    pub min_freq: usize,
    vocab: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Tokenizer {
    pub fn fit<'a>(texts: impl IntoIterator<Item = &'a str>, min_freq: usize, lowercase: bool) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for text in texts {
            for w in split_words(text) {
                let w = if lowercase { w.to_lowercase() } else { w.to_string() };
                *counts.entry(w).or_default() += 1;
            }
        }
        let words = counts
            .into_iter()
            .filter(|(w, c)| *c >= min_freq.max(1) && !SPECIALS.contains(&w.as_str()))
            .map(|(w, _)| w);
        Self::from_vocab(SPECIALS.iter().map(|s| s.to_string()).chain(words).collect(), min_freq, lowercase)
    }

    fn from_vocab(vocab: Vec<String>, min_freq: usize, lowercase: bool) -> Self {
        let index = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Tokenizer {
            lowercase,
            min_freq,
            vocab,
            index,
        }
    }

    /// Rebuild the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> &str {
        self.vocab.get(id).map(String::as_str).unwrap_or(UNK)
    }

    /// Words of `text`, with out-of-vocabulary words replaced by `[UNK]`.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        self.ids(text).into_iter().map(|i| self.token(i).to_string()).collect()
    }

    pub fn ids(&self, text: &str) -> Vec<usize> {
        split_words(text)
            .map(|w| {
                if self.lowercase {
                    self.id(&w.to_lowercase())
                } else {
                    self.id(w)
                }
            })
            .collect()
    }
}

pub fn is_special(id: usize) -> bool {
    id == PAD_ID || id == CLS_ID || id == SEP_ID
}
