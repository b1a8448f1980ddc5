use std::fs;
use std::path::Path;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::train::CaptionerConfig;
use super::{CaptionModel, LstmParams, OutputProjection, TokenVocabulary};
use crate::encoder::persist::TensorEntry;
use crate::error::{Error, Result};
use crate::pmte::{self, Tensor};

pub const CAPTIONER_FORMAT: &str = "streetsense-captioner";
const TENSOR_NAMES: [&str; 8] = ["embedding", "feature_weight", "feature_bias", "lstm_input_weight", "lstm_recurrent_weight", "lstm_bias", "output_weight", "output_bias"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionerManifest {
    pub format: String,
    pub version: u32,
    pub tensors: Vec<TensorEntry>,
    pub vocabulary: TokenVocabulary,
    pub config: CaptionerConfig,
}

impl CaptionModel {
    fn tensors(&self) -> Vec<Tensor> {
        vec![
            Tensor::from_matrix(&self.embedding),
            Tensor::from_matrix(&self.feature_w),
            Tensor::from_vector(self.feature_b.as_slice().unwrap()),
            Tensor::from_matrix(&self.lstm.w_x),
            Tensor::from_matrix(&self.lstm.w_h),
            Tensor::from_vector(self.lstm.b.as_slice().unwrap()),
            Tensor::from_matrix(&self.proj.w),
            Tensor::from_vector(self.proj.b.as_slice().unwrap()),
        ]
    }

    /// Round every weight to f32, the precision of the weight file.
    pub fn quantize(&mut self) {
        for s in self.slices_mut() {
            for v in s {
                *v = *v as f32 as f64;
            }
        }
    }

    pub fn save(&self, config: &CaptionerConfig, weights: &Path, manifest: &Path) -> Result<()> {
        let tensors = self.tensors();
        let m = CaptionerManifest {
            format: CAPTIONER_FORMAT.into(),
            version: 1,
            tensors: TENSOR_NAMES
                .iter()
                .zip(&tensors)
                .map(|(n, t)| TensorEntry { name: n.to_string(), shape: t.dims.clone() })
                .collect(),
            vocabulary: self.vocab.clone(),
            config: config.clone(),
        };
        pmte::write(weights, &tensors)?;
        fs::write(manifest, serde_json::to_string_pretty(&m)? + "\n").map_err(|e| Error::io(manifest, e))
    }

    pub fn load(weights: &Path, manifest: &Path) -> Result<(Self, CaptionerConfig)> {
        let text = fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
        let m: CaptionerManifest = serde_json::from_str(&text)?;
        if m.format != CAPTIONER_FORMAT || m.version != 1 {
            return Err(Error::Container(format!("{} is not a version-1 captioner manifest", manifest.display())));
        }
        let tensors = pmte::read(weights)?;
        if tensors.len() != TENSOR_NAMES.len() || m.tensors.len() != TENSOR_NAMES.len() {
            return Err(Error::Shape(format!("expected {} captioner tensors, found {}", TENSOR_NAMES.len(), tensors.len())));
        }
        for ((t, e), name) in tensors.iter().zip(&m.tensors).zip(TENSOR_NAMES) {
            if e.name != name || e.shape != t.dims {
                return Err(Error::Shape(format!("tensor {name} does not match manifest entry {}", e.name)));
            }
        }
        let mut it = tensors.into_iter();
        let mut next_m = || it.next().unwrap();
        let embedding = next_m().to_matrix()?;
        let feature_w = next_m().to_matrix()?;
        let feature_b = Array1::from(next_m().to_vector()?);
        let w_x = next_m().to_matrix()?;
        let w_h = next_m().to_matrix()?;
        let b = Array1::from(next_m().to_vector()?);
        let pw = next_m().to_matrix()?;
        let pb = Array1::from(next_m().to_vector()?);
        let (v, e, h) = (m.vocabulary.len(), embedding.ncols(), w_h.ncols());
        let consistent = embedding.nrows() == v
            && feature_w.nrows() == e
            && feature_b.len() == e
            && w_x.dim() == (4 * h, e)
            && w_h.nrows() == 4 * h
            && b.len() == 4 * h
            && pw.dim() == (h, v)
            && pb.len() == v;
        if !consistent {
            return Err(Error::Shape("captioner tensors disagree with each other or with the vocabulary".into()));
        }
        let model = CaptionModel {
            vocab: m.vocabulary,
            embedding,
            feature_w,
            feature_b,
            lstm: LstmParams { w_x, w_h, b },
            proj: OutputProjection { w: pw, b: pb },
        };
        Ok((model, m.config))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn roundtrip_after_quantize() {
        let mut m = CaptionModel::new(TokenVocabulary::build(["red car", "blue bus"]), 5, 3, 4, &mut seed::rng(3));
        m.quantize();
        let dir = tempfile::tempdir().unwrap();
        let (w, j) = (dir.path().join("cap.pmte"), dir.path().join("cap.json"));
        let cfg = CaptionerConfig::default();
        m.save(&cfg, &w, &j).unwrap();
        let (back, c) = CaptionModel::load(&w, &j).unwrap();
        assert_eq!(back, m);
        assert_eq!(c, cfg);
    }
}
