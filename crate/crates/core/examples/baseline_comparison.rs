//! Tree baselines on sentence embeddings against the trained heads, rendered
//! as a six-dimension MSE / R^2 comparison table.
//!
//! cargo run --release --example baseline_comparison

use std::collections::BTreeMap;

use ndarray::Array2;
use streetsense::baselines::{BaselineKind, BaselineParams, BaselineSet};
use streetsense::corpus::{split, LabeledCorpus, LabeledEntry};
use streetsense::encoder::{init_model, train_heads, HeadTrainConfig, PerceptionModel};
use streetsense::eval::{compare, evaluate, improvement};
use streetsense::synthetic;

fn features(model: &PerceptionModel, entries: &[LabeledEntry]) -> streetsense::Result<Array2<f64>> {
    let rows = entries.iter().map(|e| model.sentence_embedding(&e.doc)).collect::<streetsense::Result<Vec<_>>>()?;
    let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
    Ok(Array2::from_shape_vec((rows.len(), rows[0].len()), flat).unwrap())
}

fn main() -> streetsense::Result<()> {
    let corpus = LabeledCorpus { entries: synthetic::marker_corpus(2000, 1), drops: Default::default() };
    let parts = split(&corpus, 0.1, 1)?;
    let cfg = HeadTrainConfig::default();
    let targets: BTreeMap<String, [f64; 6]> = parts.test.iter().map(|e| (e.image_id().to_string(), e.scores)).collect();

    let head = train_heads(&parts.train, &cfg)?.model;
    let preds = parts.test.iter().map(|e| Ok((e.image_id().to_string(), head.predict_q(&e.doc)?))).collect::<streetsense::Result<_>>()?;
    let mut reports = vec![evaluate("Fine-tuned head", &preds, &targets)?];

    let base = init_model(&parts.train, &cfg)?;
    let (x_train, x_test) = (features(&base, &parts.train)?, features(&base, &parts.test)?);
    let y: Vec<[f64; 6]> = parts.train.iter().map(|e| e.scores).collect();
    for kind in BaselineKind::ALL {
        let set = BaselineSet::fit(kind, &x_train, &y, &BaselineParams::default())?;
        let preds = parts.test.iter().map(|e| e.image_id().to_string()).zip(set.predict(&x_test)?).collect();
        reports.push(evaluate(kind.label(), &preds, &targets)?);
    }
    let table = compare(&reports)?;
    print!("{}", table.render_text());
    println!("\nMSE improvement of the head: {:.1}%", improvement(&table, "Fine-tuned head")?);
    Ok(())
}
