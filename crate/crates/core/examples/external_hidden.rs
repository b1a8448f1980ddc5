//! Write and re-import externally computed hidden states (PMTE container
//! plus JSONL index), then pool them into sentence embeddings.
//!
//! cargo run --example external_hidden

use ndarray::Array2;
use streetsense::encoder::{import_external_hidden, mean_rows, write_external_hidden, ExternalHidden};

fn main() -> streetsense::Result<()> {
    let dir = std::env::temp_dir().join(format!("streetsense-hidden-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| streetsense::Error::io(&dir, e))?;
    let container = dir.join("hidden.pmte");

    let tokens: Vec<String> = ["[CLS]", "trees", "near", "road", "[SEP]"].iter().map(|s| s.to_string()).collect();
    let items: Vec<ExternalHidden> = (0..3)
        .map(|i| ExternalHidden {
            image_id: format!("img{i}"),
            tokens: tokens.clone(),
            hidden: Array2::from_shape_fn((tokens.len(), 4), |(r, c)| (i + r) as f64 * 0.5 - c as f64),
        })
        .collect();
    write_external_hidden(&container, None, &items)?;

    for (id, h) in import_external_hidden(&container, None)? {
        let e = mean_rows(&h.hidden, &h.content_mask()).expect("content tokens");
        println!("{id}: {} tokens -> embedding {:?}", h.tokens.len(), e.to_vec());
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(())
}
