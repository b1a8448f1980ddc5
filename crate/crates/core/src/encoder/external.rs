//! Hidden states computed outside this crate (for instance by a large
//! pretrained encoder), stored as a PMTE container plus a JSONL index.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::model::HiddenMatrix;
use super::tokenizer::{CLS, PAD, SEP};
use crate::error::{Error, Result};
use crate::pmte::{self, Tensor};

/// One line of the sidecar index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HiddenIndexEntry {
    pub tensor_ordinal: usize,
    pub image_id: String,
    pub token_strings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalHidden {
    pub image_id: String,
    pub tokens: Vec<String>,
    pub hidden: HiddenMatrix,
}

impl ExternalHidden {
    /// Content positions: every token except `[CLS]`, `[SEP]` and `[PAD]`.
    pub fn content_mask(&self) -> Vec<bool> {
        self.tokens.iter().map(|t| t != CLS && t != SEP && t != PAD).collect()
    }
}

/// Default sidecar location: the container path with a `.jsonl` extension.
pub fn sidecar_path(container: &Path) -> PathBuf {
    container.with_extension("jsonl")
}

fn read_index(path: &Path) -> Result<Vec<HiddenIndexEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let src = path.display().to_string();
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(src.clone(), i as u64 + 1, e.to_string())))
        .collect()
}

/// Load every hidden matrix keyed by image id. The whole file is validated
/// before anything is returned.
pub fn import_external_hidden(container: &Path, index: Option<&Path>) -> Result<BTreeMap<String, ExternalHidden>> {
    let tensors = pmte::read(container)?;
    let index_path = index.map(Path::to_path_buf).unwrap_or_else(|| sidecar_path(container));
    let entries = read_index(&index_path)?;
    if entries.len() != tensors.len() {
        return Err(Error::Shape(format!(
            "index lists {} entries but container holds {} tensors",
            entries.len(),
            tensors.len()
        )));
    }
    let mut seen = BTreeSet::new();
    let mut width = None;
    let mut out = BTreeMap::new();
    for e in entries {
        let t = tensors.get(e.tensor_ordinal).ok_or_else(|| {
            Error::Shape(format!("{}: tensor ordinal {} out of range", e.image_id, e.tensor_ordinal))
        })?;
        if !seen.insert(e.tensor_ordinal) {
            return Err(Error::Shape(format!("tensor ordinal {} indexed twice", e.tensor_ordinal)));
        }
        let hidden = t.to_matrix()?;
        if hidden.nrows() != e.token_strings.len() {
            return Err(Error::Shape(format!(
                "{}: {} rows for {} tokens",
                e.image_id,
                hidden.nrows(),
                e.token_strings.len()
            )));
        }
        if *width.get_or_insert(hidden.ncols()) != hidden.ncols() {
            return Err(Error::Shape(format!("{}: hidden width {} differs from {}", e.image_id, hidden.ncols(), width.unwrap())));
        }
        if out.contains_key(&e.image_id) {
            return Err(Error::Shape(format!("image {} indexed twice", e.image_id)));
        }
        out.insert(
            e.image_id.clone(),
            ExternalHidden {
                image_id: e.image_id,
                tokens: e.token_strings,
                hidden,
            },
        );
    }
    Ok(out)
}

/// Write hidden matrices and their index, tensor ordinals following slice order.
pub fn write_external_hidden(container: &Path, index: Option<&Path>, items: &[ExternalHidden]) -> Result<()> {
    let tensors: Vec<Tensor> = items.iter().map(|x| Tensor::from_matrix(&x.hidden)).collect();
    pmte::write(container, &tensors)?;
    let index_path = index.map(Path::to_path_buf).unwrap_or_else(|| sidecar_path(container));
    let mut buf = Vec::new();
    for (i, x) in items.iter().enumerate() {
        let entry = HiddenIndexEntry {
            tensor_ordinal: i,
            image_id: x.image_id.clone(),
            token_strings: x.tokens.clone(),
        };
        serde_json::to_writer(&mut buf, &entry)?;
        buf.push(b'\n');
    }
    fs::File::create(&index_path)
        .and_then(|mut f| f.write_all(&buf))
        .map_err(|e| Error::io(&index_path, e))
}
