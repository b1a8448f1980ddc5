//! Topic mining over caption text.
//!
//! `build_bow` → `fit_lda` (collapsed Gibbs) → `top_words` for the summary
//! grid, plus θ-based topic/topic and topic/perception correlations.

pub mod bow;
pub mod lda;
pub mod summary;

pub use bow::{build_bow, default_stopwords, parse_stopwords, BowCorpus, STOPWORDS_VERSION};
pub use lda::{fit_lda, fit_lda_observed, LdaConfig, TopicModel};
pub use summary::{topic_label, topic_perception_correlation, topic_topic_correlation, top_words, CorrelationMatrix, TopicSummary};
