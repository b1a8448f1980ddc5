//! Embed high-dimensional points with t-SNE and cluster them with HDBSCAN.
//!
//! cargo run --release --example scene_clusters

use streetsense::scenescape::{hdbscan, trustworthiness, tsne, HdbscanConfig, TsneConfig, NOISE};
use streetsense::synthetic::{axis_centers, gaussian_blobs};

fn main() -> streetsense::Result<()> {
    let (x, truth) = gaussian_blobs(&axis_centers(4, 16, 8.0), 60, 1.0, 3);
    let layout = tsne(x.view(), &TsneConfig { seed: 3, ..TsneConfig::default() })?;
    println!(
        "t-SNE KL {:.3} -> {:.3}, trustworthiness(10) {:.3}",
        layout.initial_kl,
        layout.final_kl,
        trustworthiness(x.view(), layout.embedding.view(), 10)?
    );
    for (name, points) in [("layout", layout.embedding.view()), ("raw", x.view())] {
        let labels = hdbscan(points, &HdbscanConfig::default())?;
        let noise = labels.labels.iter().filter(|&&l| l == NOISE).count();
        println!("HDBSCAN on the {name} space: {} clusters, {noise} noise points", labels.cluster_count());
        for c in 0..labels.cluster_count() as i32 {
            let members: Vec<usize> = (0..truth.len()).filter(|&i| labels.labels[i] == c).collect();
            let blob = truth[members[0]];
            let pure = members.iter().all(|&i| truth[i] == blob);
            println!("  cluster {c}: {} points, from blob {blob}{}", members.len(), if pure { "" } else { " and others" });
        }
    }
    Ok(())
}
