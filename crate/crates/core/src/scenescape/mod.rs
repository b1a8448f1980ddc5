//! Scene maps: pooled sentence embeddings, a 2-D t-SNE layout, and
//! HDBSCAN clusters over it.

pub mod hdbscan;
pub mod tsne;

use std::io::Write;

use ndarray::{Array1, ArrayView2};

use crate::encoder::{mean_rows, HiddenMatrix};
use crate::error::{Error, Result};

pub use hdbscan::{cluster_count, hdbscan, hdbscan_detailed, ClusterLabeling, HdbscanConfig, HdbscanResult, NOISE};
pub use tsne::{tsne, trustworthiness, TsneConfig, TsneResult};

/// Mean of the rows of `hidden` selected by `content`.
pub fn sentence_embed(hidden: &HiddenMatrix, content: &[bool]) -> Result<Array1<f64>> {
    if content.len() != hidden.nrows() {
        return Err(Error::Shape(format!("mask of length {} for {} rows", content.len(), hidden.nrows())));
    }
    mean_rows(hidden, content).ok_or_else(|| Error::InvalidInput("sentence embedding over an empty content mask".into()))
}

/// `image_id,x,y,cluster_label`.
pub fn write_scene_csv<W: Write>(out: W, ids: &[String], xy: ArrayView2<f64>, labels: &[i32]) -> Result<()> {
    if ids.len() != xy.nrows() || labels.len() != ids.len() || xy.ncols() != 2 {
        return Err(Error::Shape("scene export needs one id, two coordinates and one label per point".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["image_id", "x", "y", "cluster_label"])?;
    for (i, id) in ids.iter().enumerate() {
        w.write_record([id.clone(), format!("{:.6}", xy[[i, 0]]), format!("{:.6}", xy[[i, 1]]), labels[i].to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<scene csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::Rng as _;

    #[test]
    fn embedding_cases() {
        let h = array![[1.0, 2.0], [3.0, 5.0]];
        assert_eq!(sentence_embed(&h, &[false, true]).unwrap(), array![3.0, 5.0]);
        let sym = array![[1.0, -2.0], [-1.0, 2.0]];
        assert_eq!(sentence_embed(&sym, &[true, true]).unwrap(), array![0.0, 0.0]);
        assert!(sentence_embed(&h, &[false, false]).is_err());
        assert!(sentence_embed(&h, &[true]).is_err());
    }

    #[test]
    fn embedding_matches_mean_oracle() {
        let mut rng = crate::seed::rng(4);
        let h = Array2::from_shape_fn((12, 5), |_| rng.random_range(-1.0..1.0));
        let mask: Vec<bool> = (0..12).map(|i| i % 3 != 0).collect();
        let e = sentence_embed(&h, &mask).unwrap();
        for c in 0..5 {
            let rows: Vec<f64> = (0..12).filter(|&i| mask[i]).map(|i| h[[i, c]]).collect();
            let mean = rows.iter().sum::<f64>() / rows.len() as f64;
            assert!((e[c] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn scene_csv_format() {
        let mut buf = Vec::new();
        write_scene_csv(&mut buf, &["a".into(), "b".into()], array![[0.5, -1.0], [2.0, 3.25]].view(), &[0, -1]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "image_id,x,y,cluster_label\na,0.500000,-1.000000,0\nb,2.000000,3.250000,-1\n");
    }
}
