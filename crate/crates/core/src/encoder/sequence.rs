use serde::{Deserialize, Serialize};

use super::tokenizer::{is_special, Tokenizer, CLS_ID, PAD_ID, SEP_ID};
use crate::corpus::CaptionDocument;

pub const MAX_SEQ_LENGTH: usize = 128;

/// `[CLS] s1 [SEP] s2 [SEP] ... s5 [SEP]`, padded with `[PAD]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceLayout {
    pub ids: Vec<usize>,
    /// True at word positions: not `[CLS]`, `[SEP]` or `[PAD]`. `[UNK]` counts
    /// as content.
    pub content: Vec<bool>,
    /// Number of leading non-pad positions.
    pub len: usize,
}

impl SequenceLayout {
    /// Frame already-tokenized segments. Overlong input keeps its leading
    /// tokens and always ends in `[SEP]`.
    pub fn from_segments(segments: &[Vec<usize>], max_len: usize) -> Self {
        assert!(max_len >= 2, "max_len must fit [CLS] and [SEP]");
        let mut ids = vec![CLS_ID];
        for seg in segments {
            ids.extend_from_slice(seg);
            ids.push(SEP_ID);
        }
        if ids.len() > max_len {
            ids.truncate(max_len - 1);
            ids.push(SEP_ID);
        }
        let len = ids.len();
        ids.resize(max_len, PAD_ID);
        let content = ids
            .iter()
            .enumerate()
            .map(|(i, &id)| i < len && !is_special(id))
            .collect();
        SequenceLayout { ids, content, len }
    }

    pub fn content_count(&self) -> usize {
        self.content.iter().filter(|&&c| c).count()
    }

    pub fn max_len(&self) -> usize {
        self.ids.len()
    }
}

pub fn build_sequence(doc: &CaptionDocument, tokenizer: &Tokenizer, max_len: usize) -> SequenceLayout {
    let segments: Vec<Vec<usize>> = doc.captions.iter().map(|c| tokenizer.ids(c)).collect();
    SequenceLayout::from_segments(&segments, max_len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::tokenizer::{UNK_ID, is_special};
    use proptest::prelude::*;

    fn doc(caps: &[&str]) -> CaptionDocument {
        CaptionDocument::new("x", caps.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    #[test]
    fn five_three_word_captions() {
        let d = doc(&["a b c", "a b c", "a b c", "a b c", "a b c"]);
        let t = Tokenizer::fit(d.captions.iter().map(String::as_str), 1, true);
        let s = build_sequence(&d, &t, MAX_SEQ_LENGTH);
        assert_eq!(s.ids.len(), 128);
        assert_eq!(s.content_count(), 15);
        assert_eq!(s.len, 1 + 5 * 4);
        assert_eq!(s.ids[0], CLS_ID);
        assert_eq!(s.ids[4], SEP_ID);
        assert_eq!(s.ids[20], SEP_ID);
        assert!(s.ids[21..].iter().all(|&i| i == PAD_ID));
    }

    #[test]
    fn overlong_truncates_to_sep() {
        let long = vec!["w"; 40].join(" ");
        let d = doc(&[&long, &long, &long, &long, &long]);
        let t = Tokenizer::fit(d.captions.iter().map(String::as_str), 1, true);
        let s = build_sequence(&d, &t, MAX_SEQ_LENGTH);
        assert_eq!(s.len, 128);
        assert_eq!(s.ids[127], SEP_ID);
        assert!(!s.content[127]);
        assert!(s.ids.iter().all(|&i| i != PAD_ID));
    }

    #[test]
    fn unknown_words_are_content() {
        let t = Tokenizer::fit(["known"], 1, true);
        let s = build_sequence(&doc(&["zz", "yy", "xx", "ww", "vv"]), &t, 16);
        assert_eq!(s.content_count(), 5);
        assert!(s.ids.iter().zip(&s.content).filter(|(_, &c)| c).all(|(&i, _)| i == UNK_ID));
    }

    proptest! {
        // Recount oracle: content positions are exactly the non-special ids.
        #[test]
        fn content_mask_recount(
            segs in prop::collection::vec(prop::collection::vec(prop::sample::select(vec![1usize, 4, 5, 6, 7, 8, 9]), 0..40), 5),
            max_len in 2usize..130,
        ) {
            let s = SequenceLayout::from_segments(&segs, max_len);
            prop_assert_eq!(s.ids.len(), max_len);
            prop_assert_eq!(s.ids[0], CLS_ID);
            prop_assert_eq!(s.ids[s.len - 1], SEP_ID);
            let recount = s.ids[..s.len].iter().filter(|&&i| !is_special(i)).count();
            prop_assert_eq!(s.content_count(), recount);
            let total: usize = segs.iter().map(|x| x.len()).sum();
            if total + 6 <= max_len {
                prop_assert_eq!(recount, total);
            }
        }
    }
}
