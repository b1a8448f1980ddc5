use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CaptionDocument, QScoreTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEntry {
    pub doc: CaptionDocument,
    /// Q-scores in canonical dimension order.
    pub scores: [f64; 6],
}

impl LabeledEntry {
    pub fn image_id(&self) -> &str {
        &self.doc.image_id
    }
}

/// Why rows fell out of the join.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinDrops {
    /// Caption documents whose image has no score at all.
    pub no_scores: usize,
    /// Caption documents whose image lacks at least one dimension.
    pub incomplete_scores: usize,
    /// Scored images without a caption document.
    pub no_captions: usize,
    /// Repeated caption documents for an image already joined.
    pub duplicate_captions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCorpus {
    pub entries: Vec<LabeledEntry>,
    pub drops: JoinDrops,
}

impl LabeledCorpus {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Inner join of scores and captions on image id, keeping caption order.
pub fn join_dataset(scores: &QScoreTable, captions: &[CaptionDocument]) -> Result<LabeledCorpus> {
    let mut drops = JoinDrops::default();
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for doc in captions {
        if !seen.insert(doc.image_id.as_str()) {
            drops.duplicate_captions += 1;
            continue;
        }
        match (scores.row(&doc.image_id), scores.complete(&doc.image_id)) {
            (None, _) => drops.no_scores += 1,
            (Some(_), None) => drops.incomplete_scores += 1,
            (Some(_), Some(s)) => entries.push(LabeledEntry {
                doc: doc.clone(),
                scores: s,
            }),
        }
    }
    drops.no_captions = scores.image_ids().filter(|id| !seen.contains(id)).count();
    if entries.is_empty() {
        return Err(Error::Degenerate(
            "no image has both a full set of six scores and captions".into(),
        ));
    }
    Ok(LabeledCorpus { entries, drops })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<LabeledEntry>,
    pub test: Vec<LabeledEntry>,
}

impl Split {
    pub fn test_hash(&self) -> String {
        id_set_hash(self.test.iter().map(|e| e.image_id()))
    }
}

/// SHA-256 over the sorted, newline-joined set of ids. Two evaluations are
/// comparable only when their id-set hashes agree.
pub fn id_set_hash<'a>(ids: impl IntoIterator<Item = &'a str>) -> String {
    let sorted: BTreeSet<&str> = ids.into_iter().collect();
    let mut h = Sha256::new();
    for id in sorted {
        h.update(id.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Seeded shuffle, then the first `round(test_fraction * N)` entries go to
/// test. Both halves keep the corpus order.
pub fn split(corpus: &LabeledCorpus, test_fraction: f64, seed: u64) -> Result<Split> {
    let n = corpus.len();
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidInput(format!("test fraction {test_fraction} must lie in (0, 1)")));
    }
    let n_test = (test_fraction * n as f64).round() as usize;
    if n < 2 || n_test == 0 || n_test == n {
        return Err(Error::Degenerate(format!(
            "corpus of {n} entries too small for a {test_fraction} test split"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut crate::seed::rng(seed));
    let mut is_test = vec![false; n];
    for &i in &order[..n_test] {
        is_test[i] = true;
    }
    let (mut train, mut test) = (Vec::with_capacity(n - n_test), Vec::with_capacity(n_test));
    for (e, t) in corpus.entries.iter().zip(is_test) {
        if t {
            test.push(e.clone());
        } else {
            train.push(e.clone());
        }
    }
    Ok(Split { train, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PerceptionDimension;
    use proptest::prelude::*;

    fn doc(id: &str) -> CaptionDocument {
        CaptionDocument::new(id, (0..5).map(|i| format!("cap {i}")).collect()).unwrap()
    }

    fn full(table: &mut QScoreTable, id: &str) {
        for d in PerceptionDimension::ALL {
            table.insert(d, id, 5.0).unwrap();
        }
    }

    fn corpus(n: usize) -> LabeledCorpus {
        let mut t = QScoreTable::new();
        let docs: Vec<_> = (0..n).map(|i| doc(&format!("img{i}"))).collect();
        for d in &docs {
            full(&mut t, &d.image_id);
        }
        join_dataset(&t, &docs).unwrap()
    }

    #[test]
    fn full_join() {
        let c = corpus(3);
        assert_eq!(c.len(), 3);
        assert_eq!(c.drops, JoinDrops::default());
    }

    #[test]
    fn missing_dimension_dropped() {
        let mut t = QScoreTable::new();
        full(&mut t, "a");
        for d in PerceptionDimension::ALL {
            if d != PerceptionDimension::Boring {
                t.insert(d, "b", 4.0).unwrap();
            }
        }
        let c = join_dataset(&t, &[doc("a"), doc("b")]).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.drops.incomplete_scores, 1);
    }

    #[test]
    fn empty_intersection_is_error() {
        let mut t = QScoreTable::new();
        full(&mut t, "a");
        assert!(join_dataset(&t, &[doc("b")]).is_err());
    }

    #[test]
    fn join_is_repeatable() {
        let mut t = QScoreTable::new();
        full(&mut t, "a");
        full(&mut t, "c");
        let docs = [doc("a"), doc("b"), doc("a"), doc("c")];
        let first = join_dataset(&t, &docs).unwrap();
        let second = join_dataset(&t, &docs).unwrap();
        assert_eq!(first, second);
        assert_eq!(first.drops, JoinDrops { no_scores: 1, incomplete_scores: 0, no_captions: 0, duplicate_captions: 1 });
    }

    #[test]
    fn ninety_ten_on_ten() {
        let s = split(&corpus(10), 0.1, 3).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (9, 1));
        assert_eq!(s, split(&corpus(10), 0.1, 3).unwrap());
    }

    #[test]
    fn too_small_rejected() {
        assert!(split(&corpus(1), 0.5, 0).is_err());
        assert!(split(&corpus(2), 0.1, 0).is_err());
        assert!(split(&corpus(5), 0.0, 0).is_err());
    }

    #[test]
    fn hash_ignores_order() {
        assert_eq!(id_set_hash(["b", "a"]), id_set_hash(["a", "b"]));
        assert_ne!(id_set_hash(["a"]), id_set_hash(["a", "b"]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn split_partitions(n in 2usize..60, frac in 0.05f64..0.95, seed in any::<u64>()) {
            let c = corpus(n);
            let n_test = (frac * n as f64).round() as usize;
            match split(&c, frac, seed) {
                Ok(s) => {
                    prop_assert_eq!(s.test.len(), n_test);
                    let tr: BTreeSet<_> = s.train.iter().map(|e| e.image_id().to_string()).collect();
                    let te: BTreeSet<_> = s.test.iter().map(|e| e.image_id().to_string()).collect();
                    prop_assert!(tr.is_disjoint(&te));
                    prop_assert_eq!(tr.len() + te.len(), n);
                }
                Err(_) => prop_assert!(n_test == 0 || n_test == n),
            }
        }

        // Set-logic oracle for randomized partial overlap.
        #[test]
        fn join_size_matches_intersection(
            scored in prop::collection::btree_set(0u8..30, 0..20),
            partial in prop::collection::btree_set(0u8..30, 0..10),
            captioned in prop::collection::btree_set(0u8..30, 1..20),
        ) {
            let mut t = QScoreTable::new();
            for i in &scored {
                full(&mut t, &format!("i{i}"));
            }
            for i in partial.difference(&scored) {
                t.insert(PerceptionDimension::Safe, &format!("i{i}"), 1.0).unwrap();
            }
            let docs: Vec<_> = captioned.iter().map(|i| doc(&format!("i{i}"))).collect();
            let expected = scored.intersection(&captioned).count();
            match join_dataset(&t, &docs) {
                Ok(c) => {
                    prop_assert_eq!(c.len(), expected);
                    let partial_only: BTreeSet<_> = partial.difference(&scored).copied().collect();
                    prop_assert_eq!(c.drops.incomplete_scores, partial_only.intersection(&captioned).count());
                }
                Err(_) => prop_assert_eq!(expected, 0),
            }
        }
    }
}
