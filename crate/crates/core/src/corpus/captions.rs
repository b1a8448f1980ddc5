use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CAPTIONS_PER_IMAGE: usize = 5;

/// The five scene descriptions generated for one image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionDocument {
    pub image_id: String,
    pub captions: Vec<String>,
}

impl CaptionDocument {
    pub fn new(image_id: impl Into<String>, captions: Vec<String>) -> Result<Self> {
        let doc = CaptionDocument {
            image_id: image_id.into(),
            captions,
        };
        doc.validate()?;
        Ok(doc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_id.is_empty() {
            return Err(Error::InvalidInput("caption document with empty image_id".into()));
        }
        if self.captions.len() != CAPTIONS_PER_IMAGE {
            return Err(Error::InvalidInput(format!(
                "image {} has {} captions, expected {CAPTIONS_PER_IMAGE}",
                self.image_id,
                self.captions.len()
            )));
        }
        if let Some(i) = self.captions.iter().position(|c| c.trim().is_empty()) {
            return Err(Error::InvalidInput(format!("image {} caption {i} is empty", self.image_id)));
        }
        Ok(())
    }
}

pub fn load_captions(path: &Path) -> Result<Vec<CaptionDocument>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_captions(f, &path.display().to_string())
}

/// One JSON object per line: `{"image_id": ..., "captions": [5 strings]}`.
/// Blank lines are skipped.
pub fn parse_captions<R: Read>(reader: R, source: &str) -> Result<Vec<CaptionDocument>> {
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i as u64 + 1;
        let line = line.map_err(|e| Error::parse(source, lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: CaptionDocument =
            serde_json::from_str(&line).map_err(|e| Error::parse(source, lineno, e.to_string()))?;
        doc.validate().map_err(|e| Error::parse(source, lineno, e.to_string()))?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_captions<W: Write>(mut out: W, docs: &[CaptionDocument]) -> Result<()> {
    for d in docs {
        writeln!(out, "{}", serde_json::to_string(d)?).map_err(|e| Error::io("<captions jsonl>", e))?;
    }
    out.flush().map_err(|e| Error::io("<captions jsonl>", e))
}
