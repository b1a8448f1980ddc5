//! LDA over caption documents: the top-word grid and topic correlations.
//!
//! cargo run --release --example topics

use streetsense::topics::{build_bow, default_stopwords, fit_lda, top_words, topic_topic_correlation, LdaConfig};
use streetsense::synthetic;

fn main() -> streetsense::Result<()> {
    let docs = synthetic::topic_corpus(300, 21);
    let bow = build_bow(&docs, &default_stopwords(), 1)?;
    println!(
        "{} documents, {} word types, {} tokens kept ({} stopword tokens removed)",
        bow.n_docs(),
        bow.vocab_size(),
        bow.total_tokens(),
        bow.stopword_tokens
    );
    let model = fit_lda(&bow, &LdaConfig { topics: 3, iterations: 300, seed: 1, ..LdaConfig::default() })?;
    print!("\n{}", top_words(&model, 5)?.render_text());

    let mut out = Vec::new();
    topic_topic_correlation(&model)?.write_csv(&mut out)?;
    println!("\ntopic/topic correlation:\n{}", String::from_utf8_lossy(&out));
    Ok(())
}
