//! File formats used only by the command-line pipeline.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::corpus::PerceptionDimension;
use crate::error::{Error, Result};

pub const PREDICTIONS_HEADER: [&str; 3] = ["image_id", "dimension", "prediction"];

/// Six scores per image id.
pub type ScoreMap = BTreeMap<String, [f64; 6]>;

pub fn write_predictions<W: Write>(out: W, preds: &ScoreMap) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PREDICTIONS_HEADER)?;
    for (id, row) in preds {
        for d in PerceptionDimension::ALL {
            w.write_record([id.as_str(), d.name(), &format!("{:.6}", row[d.index()])])?;
        }
    }
    w.flush().map_err(|e| Error::io("<predictions csv>", e))?;
    Ok(())
}

/// Reads predictions; every image must carry all six dimensions.
pub fn read_predictions(path: &Path) -> Result<ScoreMap> {
    let src = path.display().to_string();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(f);
    if r.headers()?.iter().collect::<Vec<_>>() != PREDICTIONS_HEADER {
        return Err(Error::parse(&src, 1, format!("header must be {}", PREDICTIONS_HEADER.join(","))));
    }
    let mut rows: BTreeMap<String, [Option<f64>; 6]> = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        let d: PerceptionDimension = rec[1].parse().map_err(|e: Error| Error::parse(&src, line, e.to_string()))?;
        let v: f64 = rec[2].parse().map_err(|_| Error::parse(&src, line, format!("bad prediction {:?}", &rec[2])))?;
        if !v.is_finite() {
            return Err(Error::parse(&src, line, "non-finite prediction"));
        }
        let slot = &mut rows.entry(rec[0].to_string()).or_insert([None; 6])[d.index()];
        if slot.is_some() {
            return Err(Error::parse(&src, line, format!("duplicate prediction for {} {d}", &rec[0])));
        }
        *slot = Some(v);
    }
    rows.into_iter()
        .map(|(id, r)| {
            let full: Option<Vec<f64>> = r.iter().copied().collect();
            let full = full.ok_or_else(|| Error::parse(&src, 0, format!("{id} lacks a dimension")))?;
            Ok((id, [full[0], full[1], full[2], full[3], full[4], full[5]]))
        })
        .collect()
}

/// `image_id,e0,e1,...` with 6-decimal values.
pub fn write_embeddings<W: Write>(out: W, ids: &[String], x: &Array2<f64>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["image_id".to_string()];
    header.extend((0..x.ncols()).map(|j| format!("e{j}")));
    w.write_record(&header)?;
    for (id, row) in ids.iter().zip(x.rows()) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|v| format!("{v:.6}")));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<embeddings csv>", e))?;
    Ok(())
}

pub fn read_embeddings(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let src = path.display().to_string();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(f);
    let width = r.headers()?.len();
    if width < 2 || &r.headers()?[0] != "image_id" {
        return Err(Error::parse(&src, 1, "header must be image_id,e0,..."));
    }
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        ids.push(rec[0].to_string());
        for v in rec.iter().skip(1) {
            let x: f64 = v.parse().map_err(|_| Error::parse(&src, i as u64 + 2, format!("bad value {v:?}")))?;
            data.push(x);
        }
    }
    if ids.is_empty() {
        return Err(Error::InvalidInput(format!("{src} holds no embeddings")));
    }
    let x = Array2::from_shape_vec((ids.len(), width - 1), data).map_err(|e| Error::Shape(e.to_string()))?;
    Ok((ids, x))
}

/// One training pair for the captioner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionPair {
    pub feature: Vec<f64>,
    pub caption: String,
}

/// An image feature to caption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub image_id: String,
    pub feature: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedCaption {
    pub image_id: String,
    pub caption: String,
}

pub fn read_jsonl<T: DeserializeOwned, R: Read>(reader: R, source: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::parse(source, i as u64 + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(source, i as u64 + 1, e.to_string()))?);
    }
    Ok(out)
}

pub fn load_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl(f, &path.display().to_string())
}

pub fn write_jsonl<T: Serialize, W: Write>(mut out: W, items: &[T]) -> Result<()> {
    for it in items {
        writeln!(out, "{}", serde_json::to_string(it)?).map_err(|e| Error::io("<jsonl>", e))?;
    }
    out.flush().map_err(|e| Error::io("<jsonl>", e))
}

/// The train/test partition used by `train`, reused by `predict`,
/// `baseline` and `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub seed: u64,
    pub test_fraction: f64,
    pub test_hash: String,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

impl SplitFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predictions_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        let mut m = ScoreMap::new();
        m.insert("b".into(), [1.0, 2.0, 3.0, 4.0, 5.0, 6.5]);
        m.insert("a".into(), [0.1234567, 0.0, 0.0, 0.0, 0.0, 10.0]);
        write_predictions(File::create(&p).unwrap(), &m).unwrap();
        let back = read_predictions(&p).unwrap();
        assert_eq!(back["b"], m["b"]);
        assert_eq!(back["a"][0], 0.123457);
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("image_id,dimension,prediction\na,beautiful,0.123457\n"));
        fs::write(&p, "image_id,dimension,prediction\na,safe,1.0\n").unwrap();
        assert!(read_predictions(&p).is_err());
    }

    #[test]
    fn embeddings_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        let x = ndarray::array![[0.5, -1.0, 2.0], [3.0, 4.0, 5.25]];
        write_embeddings(File::create(&p).unwrap(), &["u".into(), "v".into()], &x).unwrap();
        let (ids, back) = read_embeddings(&p).unwrap();
        assert_eq!(ids, vec!["u", "v"]);
        assert_eq!(back, x);
    }
}
