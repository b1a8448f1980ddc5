//! Model files: weights in a PMTE container, everything else in a JSON
//! manifest next to it.

use std::fs;
use std::path::Path;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::head::RegressionHead;
use super::model::ContextualEncoder;
use super::tokenizer::Tokenizer;
use super::train::{HeadTrainConfig, TargetRange};
use super::PerceptionModel;
use crate::corpus::PerceptionDimension;
use crate::error::{Error, Result};
use crate::pmte::{self, Tensor};

pub const MODEL_FORMAT: &str = "streetsense-perception-model";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format: String,
    pub version: u32,
    pub tensors: Vec<TensorEntry>,
    pub tokenizer: Tokenizer,
    pub targets: Vec<(PerceptionDimension, TargetRange)>,
    pub config: HeadTrainConfig,
}

fn tensor_names() -> Vec<String> {
    let mut names: Vec<String> = ["token_embedding", "position_embedding", "attention_query", "attention_key", "attention_value", "attention_output"]
        .map(String::from)
        .to_vec();
    for d in PerceptionDimension::ALL {
        names.push(format!("head_{d}_weights"));
        names.push(format!("head_{d}_bias"));
    }
    names
}

impl PerceptionModel {
    fn tensors(&self) -> Vec<Tensor> {
        let e = &self.encoder;
        let mut t: Vec<Tensor> = [&e.token_embedding, &e.position_embedding, &e.query, &e.key, &e.value, &e.output]
            .into_iter()
            .map(Tensor::from_matrix)
            .collect();
        for h in &self.heads {
            t.push(Tensor::from_matrix(&h.weights));
            t.push(Tensor::from_vector(h.bias.as_slice().unwrap()));
        }
        t
    }

    pub fn manifest(&self) -> ModelManifest {
        ModelManifest {
            format: MODEL_FORMAT.into(),
            version: 1,
            tensors: tensor_names()
                .into_iter()
                .zip(self.tensors())
                .map(|(name, t)| TensorEntry { name, shape: t.dims })
                .collect(),
            tokenizer: self.tokenizer.clone(),
            targets: PerceptionDimension::ALL.iter().map(|&d| (d, self.targets[d.index()])).collect(),
            config: self.config.clone(),
        }
    }

    /// Round every weight to f32 so that a saved and reloaded model is
    /// exactly this one.
    pub fn quantize(&mut self) {
        for (_, _, s) in self.group_slices_mut_all() {
            for v in s {
                *v = *v as f32 as f64;
            }
        }
    }

    pub fn save(&self, weights: &Path, manifest: &Path) -> Result<()> {
        pmte::write(weights, &self.tensors())?;
        let json = serde_json::to_string_pretty(&self.manifest())?;
        fs::write(manifest, json + "\n").map_err(|e| Error::io(manifest, e))
    }

    pub fn load(weights: &Path, manifest: &Path) -> Result<Self> {
        let text = fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
        let mut m: ModelManifest = serde_json::from_str(&text)?;
        if m.format != MODEL_FORMAT || m.version != 1 {
            return Err(Error::Container(format!("{} is not a version-1 model manifest", manifest.display())));
        }
        let tensors = pmte::read(weights)?;
        let names = tensor_names();
        if tensors.len() != names.len() || m.tensors.len() != names.len() {
            return Err(Error::Shape(format!("expected {} tensors, found {}", names.len(), tensors.len())));
        }
        for ((t, entry), name) in tensors.iter().zip(&m.tensors).zip(&names) {
            if &entry.name != name || entry.shape != t.dims {
                return Err(Error::Shape(format!("tensor {name} does not match manifest entry {}", entry.name)));
            }
        }
        let mut it = tensors.into_iter();
        let encoder = ContextualEncoder {
            token_embedding: it.next().unwrap().to_matrix()?,
            position_embedding: it.next().unwrap().to_matrix()?,
            query: it.next().unwrap().to_matrix()?,
            key: it.next().unwrap().to_matrix()?,
            value: it.next().unwrap().to_matrix()?,
            output: it.next().unwrap().to_matrix()?,
        };
        let mut heads = Vec::with_capacity(6);
        for _ in 0..6 {
            let weights = it.next().unwrap().to_matrix()?;
            let bias = Array1::from(it.next().unwrap().to_vector()?);
            if bias.len() != 2 {
                return Err(Error::Shape(format!("head bias of length {}", bias.len())));
            }
            heads.push(RegressionHead { weights, bias });
        }
        let h = encoder.hidden_size();
        if encoder.vocab_size() != m.tokenizer.vocab_size()
            || [&encoder.query, &encoder.key, &encoder.value, &encoder.output].iter().any(|w| w.dim() != (h, h))
            || heads.iter().any(|hd| hd.weights.dim() != (h, 2))
        {
            return Err(Error::Shape("model tensors disagree with each other or with the vocabulary".into()));
        }
        m.tokenizer.reindex();
        let mut targets = [TargetRange { min: 0.0, max: 10.0 }; 6];
        for (d, r) in m.targets {
            targets[d.index()] = r;
        }
        Ok(PerceptionModel {
            tokenizer: m.tokenizer,
            encoder,
            heads,
            targets,
            config: m.config,
        })
    }
}
