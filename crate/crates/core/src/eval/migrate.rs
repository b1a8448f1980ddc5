use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::r2;
use crate::corpus::{CaptionDocument, PerceptionDimension};
use crate::encoder::PerceptionModel;
use crate::error::{Error, Result};

/// Bounds of the manual rating scale, e.g. 1 to 7.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatingScale {
    pub min: f64,
    pub max: f64,
}

impl RatingScale {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::InvalidInput(format!("rating scale [{min}, {max}] is not a proper interval")));
        }
        Ok(RatingScale { min, max })
    }

    /// Map a rating onto [0, 10].
    pub fn to_ten(&self, v: f64) -> f64 {
        10.0 * (v - self.min) / (self.max - self.min)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    rating_scale: RatingScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationLocation {
    pub location_id: String,
    pub latitude: f64,
    pub longitude: f64,
    pub captions: Vec<String>,
    /// Mean manual rating per dimension, on the declared scale.
    pub ratings: BTreeMap<PerceptionDimension, f64>,
    pub raters: u32,
}

impl MigrationLocation {
    pub fn document(&self) -> Result<CaptionDocument> {
        CaptionDocument::new(self.location_id.clone(), self.captions.clone())
    }

    fn validate(&self, scale: &RatingScale) -> Result<()> {
        self.document()?;
        if self.raters == 0 {
            return Err(Error::InvalidInput(format!("location {} has no raters", self.location_id)));
        }
        for d in PerceptionDimension::ALL {
            match self.ratings.get(&d) {
                Some(v) if v.is_finite() && *v >= scale.min && *v <= scale.max => {}
                Some(v) => {
                    return Err(Error::InvalidInput(format!(
                        "location {} {d} rating {v} outside [{}, {}]",
                        self.location_id, scale.min, scale.max
                    )))
                }
                None => return Err(Error::InvalidInput(format!("location {} lacks a {d} rating", self.location_id))),
            }
        }
        Ok(())
    }

    pub fn rating(&self, d: PerceptionDimension) -> f64 {
        self.ratings[&d]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MigrationSet {
    pub scale: RatingScale,
    pub locations: Vec<MigrationLocation>,
}

impl MigrationSet {
    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(f, &path.display().to_string())
    }

    /// JSONL: the first non-blank line is `{"rating_scale": {"min": .., "max": ..}}`,
    /// then one location object per line.
    pub fn parse<R: Read>(reader: R, source: &str) -> Result<Self> {
        let mut scale = None;
        let mut locations = Vec::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let lineno = i as u64 + 1;
            let line = line.map_err(|e| Error::parse(source, lineno, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            match scale {
                None => {
                    let h: Header = serde_json::from_str(&line).map_err(|e| {
                        Error::parse(source, lineno, format!("expected a rating_scale header line: {e}"))
                    })?;
                    scale = Some(RatingScale::new(h.rating_scale.min, h.rating_scale.max)?);
                }
                Some(s) => {
                    let loc: MigrationLocation =
                        serde_json::from_str(&line).map_err(|e| Error::parse(source, lineno, e.to_string()))?;
                    loc.validate(&s).map_err(|e| Error::parse(source, lineno, e.to_string()))?;
                    locations.push(loc);
                }
            }
        }
        let scale = scale.ok_or_else(|| Error::parse(source, 0, "no rating_scale header line"))?;
        Ok(MigrationSet { scale, locations })
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<migration set>", e);
        let header = Header { rating_scale: self.scale };
        writeln!(out, "{}", serde_json::to_string(&header)?).map_err(io)?;
        for loc in &self.locations {
            writeln!(out, "{}", serde_json::to_string(loc)?).map_err(io)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write(std::io::BufWriter::new(f))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub predicted: f64,
    pub manual: f64,
    pub dimension: PerceptionDimension,
    pub location_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationResult {
    /// R² over all (location, dimension) pairs stacked together.
    pub pooled_r2: f64,
    pub per_dimension: BTreeMap<PerceptionDimension, f64>,
    pub points: Vec<ScatterPoint>,
}

impl MigrationResult {
    pub fn write_scatter_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["predicted", "manual", "dimension", "location_id"])?;
        for p in &self.points {
            w.write_record([format!("{:.6}", p.predicted), format!("{:.6}", p.manual), p.dimension.to_string(), p.location_id.clone()])?;
        }
        w.flush().map_err(|e| Error::io("<scatter csv>", e))?;
        Ok(())
    }
}

/// Score precomputed predictions (one row per location, [0, 10] scale)
/// against the manual ratings rescaled onto [0, 10].
pub fn migrate_predictions(predictions: &[[f64; 6]], set: &MigrationSet) -> Result<MigrationResult> {
    if set.locations.is_empty() {
        return Err(Error::InvalidInput("migration set has no locations".into()));
    }
    if predictions.len() != set.locations.len() {
        return Err(Error::Shape(format!("{} predictions for {} locations", predictions.len(), set.locations.len())));
    }
    let mut points = Vec::with_capacity(6 * predictions.len());
    let mut per_dimension = BTreeMap::new();
    for d in PerceptionDimension::ALL {
        let manual: Vec<f64> = set.locations.iter().map(|l| set.scale.to_ten(l.rating(d))).collect();
        let pred: Vec<f64> = predictions.iter().map(|p| p[d.index()]).collect();
        per_dimension.insert(d, r2(&manual, &pred).map_err(|e| Error::Degenerate(format!("{d}: {e}")))?);
        for ((l, &m), &p) in set.locations.iter().zip(&manual).zip(&pred) {
            points.push(ScatterPoint { predicted: p, manual: m, dimension: d, location_id: l.location_id.clone() });
        }
    }
    let manual: Vec<f64> = points.iter().map(|p| p.manual).collect();
    let pred: Vec<f64> = points.iter().map(|p| p.predicted).collect();
    let pooled_r2 = r2(&manual, &pred)?;
    Ok(MigrationResult { pooled_r2, per_dimension, points })
}

/// Predict each location with `model` (Q-score scale) and score against the
/// manual ratings.
pub fn migrate(model: &PerceptionModel, set: &MigrationSet) -> Result<MigrationResult> {
    let preds = set
        .locations
        .iter()
        .map(|l| model.predict_q(&l.document()?))
        .collect::<Result<Vec<_>>>()?;
    migrate_predictions(&preds, set)
}
