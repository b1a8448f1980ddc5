//! Train the six perception heads on a small marker corpus and score new
//! caption documents.
//!
//! cargo run --release --example perception_model

use streetsense::corpus::{split, CaptionDocument, LabeledCorpus, PerceptionDimension};
use streetsense::encoder::{train_heads, HeadTrainConfig};
use streetsense::eval::r2;
use streetsense::synthetic;

fn main() -> streetsense::Result<()> {
    let corpus = LabeledCorpus { entries: synthetic::marker_corpus(2000, 1), drops: Default::default() };
    let parts = split(&corpus, 0.1, 1)?;
    let cfg = HeadTrainConfig::default();
    let outcome = train_heads(&parts.train, &cfg)?;
    println!("loss by epoch: {:?}", outcome.loss_trace.iter().map(|l| format!("{l:.4}")).collect::<Vec<_>>());

    let model = outcome.model;
    for d in PerceptionDimension::ALL {
        let y: Vec<f64> = parts.test.iter().map(|e| e.scores[d.index()]).collect();
        let p: Vec<f64> = parts.test.iter().map(|e| model.predict_q(&e.doc).unwrap()[d.index()]).collect();
        println!("{:<11} test R^2 {:.3}", d.title(), r2(&y, &p)?);
    }

    let doc = CaptionDocument::new(
        "new",
        vec![
            "trees and park near garden".into(),
            "flowers and trees near park".into(),
            "a wide road near house".into(),
            "trash and rubble near ruins".into(),
            "a small car behind wall".into(),
        ],
    )?;
    println!("\nscores on the 0 to 10 scale for a new image:");
    for (d, s) in PerceptionDimension::ALL.iter().zip(model.predict_doc(&doc)?) {
        println!("  {:<11} {s:.2}", d.title());
    }
    Ok(())
}
