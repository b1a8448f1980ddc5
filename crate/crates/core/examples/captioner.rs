//! Fit the LSTM caption decoder on twenty feature/caption pairs and
//! decode greedily.
//!
//! cargo run --release --example captioner

use streetsense::captioner::{train_captioner, CaptionerConfig};
use streetsense::synthetic;

fn main() -> streetsense::Result<()> {
    let pairs = synthetic::caption_pairs();
    let cfg = CaptionerConfig::default();
    let trained = train_captioner(&pairs, &cfg)?;
    println!(
        "loss {:.3} -> {:.4} over {} epochs",
        trained.loss_trace[0],
        trained.loss_trace.last().unwrap(),
        cfg.epochs
    );
    let mut exact = 0;
    for (feature, reference) in &pairs {
        let got = trained.model.caption(feature, cfg.max_len)?;
        exact += usize::from(&got == reference);
        println!("{reference:<22} -> {got}");
    }
    println!("{exact}/{} exact", pairs.len());
    Ok(())
}
