//! Pairwise votes to per-image Q-scores.
//!
//! cargo run --example qscores

use streetsense::corpus::{q_score, tally, PerceptionDimension, QScoreTable};
use streetsense::synthetic;

fn main() -> streetsense::Result<()> {
    let votes = synthetic::tournament(8, 200, 1);
    let t = tally(&votes, PerceptionDimension::Safe);
    let scores = q_score(&t)?;
    println!("{:<10} {:>4} {:>4} {:>4} {:>8}", "image", "win", "loss", "tie", "Q");
    for (id, q) in &scores {
        let s = &t.images[id];
        println!("{id:<10} {:>4} {:>4} {:>4} {q:>8.3}", s.wins, s.losses, s.ties);
    }

    let table = QScoreTable::from_votes(&votes)?;
    let mut out = Vec::new();
    table.write_csv(&mut out)?;
    println!("\nfirst rows of the score table:");
    for line in String::from_utf8_lossy(&out).lines().take(7) {
        println!("{line}");
    }
    Ok(())
}
