//! Check a trained model against manual ratings at new locations and write
//! the predicted-vs-manual scatter.
//!
//! cargo run --release --example migration

use streetsense::corpus::{split, LabeledCorpus};
use streetsense::encoder::{train_heads, HeadTrainConfig};
use streetsense::eval::migrate;
use streetsense::synthetic;

fn main() -> streetsense::Result<()> {
    let corpus = LabeledCorpus { entries: synthetic::marker_corpus(2000, 1), drops: Default::default() };
    let parts = split(&corpus, 0.1, 1)?;
    let model = train_heads(&parts.train, &HeadTrainConfig::default())?.model;

    let (set, _) = synthetic::migration_set(71, 15, 0.8, 9);
    let result = migrate(&model, &set)?;
    println!("{} locations rated on [{}, {}]", set.locations.len(), set.scale.min, set.scale.max);
    println!("pooled R^2 {:.3}", result.pooled_r2);
    for (d, r) in &result.per_dimension {
        println!("  {:<11} {r:.3}", d.title());
    }
    let mut out = Vec::new();
    result.write_scatter_csv(&mut out)?;
    println!("\nscatter CSV head:");
    for line in String::from_utf8_lossy(&out).lines().take(4) {
        println!("{line}");
    }
    Ok(())
}
