use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{PerceptionDimension, WinLossTally};
use crate::error::{Error, Result};

pub const SCORES_HEADER: [&str; 3] = ["image_id", "dimension", "q_score"];

/// Convert one dimension's tallies into scores on [0, 10].
///
/// With `W = wins/total` and `L = losses/total`,
///
/// ```text
/// Q_i = 10/3 * (W_i + mean_{j in beaten(i)} W_j - mean_{k in beaten_by(i)} L_k + 1)
/// ```
///
/// where an empty mean is 0. Opponent sums run in ascending id order.
pub fn q_score(tally: &WinLossTally) -> Result<BTreeMap<String, f64>> {
    let mut ratios = BTreeMap::new();
    for (id, t) in &tally.images {
        let total = t.total();
        if total == 0 {
            return Err(Error::Degenerate(format!(
                "image {id} has no comparisons in {}; its score is undefined",
                tally.dimension
            )));
        }
        ratios.insert(id.as_str(), (t.wins as f64 / total as f64, t.losses as f64 / total as f64));
    }
    let lookup = |id: &str| {
        ratios
            .get(id)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("opponent {id} missing from tally")))
    };

    let mut scores = BTreeMap::new();
    for (id, t) in &tally.images {
        let (win_ratio, _) = ratios[id.as_str()];
        let mut beaten_sum = 0.0;
        for j in &t.beaten {
            beaten_sum += lookup(j)?.0;
        }
        let beaten_mean = if t.beaten.is_empty() { 0.0 } else { beaten_sum / t.beaten.len() as f64 };
        let mut beaten_by_sum = 0.0;
        for k in &t.beaten_by {
            beaten_by_sum += lookup(k)?.1;
        }
        let beaten_by_mean = if t.beaten_by.is_empty() {
            0.0
        } else {
            beaten_by_sum / t.beaten_by.len() as f64
        };
        let q = 10.0 / 3.0 * (win_ratio + beaten_mean - beaten_by_mean + 1.0);
        scores.insert(id.clone(), q.clamp(0.0, 10.0));
    }
    Ok(scores)
}

/// Per-image, per-dimension Q-scores.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QScoreTable {
    entries: BTreeMap<String, [Option<f64>; 6]>,
}

impl QScoreTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Tally and score every dimension present in `votes`.
    pub fn from_votes(votes: &[super::VoteRecord]) -> Result<Self> {
        let mut table = QScoreTable::new();
        for dim in PerceptionDimension::ALL {
            for (id, q) in q_score(&super::tally(votes, dim))? {
                table.insert(dim, &id, q)?;
            }
        }
        Ok(table)
    }

    pub fn insert(&mut self, dim: PerceptionDimension, image_id: &str, q: f64) -> Result<()> {
        if !(0.0..=10.0).contains(&q) {
            return Err(Error::InvalidInput(format!("score {q} for {image_id}/{dim} outside [0, 10]")));
        }
        self.entries.entry(image_id.to_string()).or_default()[dim.index()] = Some(q);
        Ok(())
    }

    pub fn extend(&mut self, dim: PerceptionDimension, scores: &BTreeMap<String, f64>) -> Result<()> {
        for (id, &q) in scores {
            self.insert(dim, id, q)?;
        }
        Ok(())
    }

    pub fn get(&self, dim: PerceptionDimension, image_id: &str) -> Option<f64> {
        self.entries.get(image_id).and_then(|row| row[dim.index()])
    }

    /// All six scores, if every dimension is present.
    pub fn complete(&self, image_id: &str) -> Option<[f64; 6]> {
        let row = self.entries.get(image_id)?;
        let mut out = [0.0; 6];
        for (o, v) in out.iter_mut().zip(row) {
            *o = (*v)?;
        }
        Some(out)
    }

    pub fn row(&self, image_id: &str) -> Option<&[Option<f64>; 6]> {
        self.entries.get(image_id)
    }

    pub fn image_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(|r| r.iter().flatten().count()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `image_id,dimension,q_score` rows, ordered by image then dimension,
    /// scores printed with six decimals.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SCORES_HEADER)?;
        for (id, row) in &self.entries {
            for dim in PerceptionDimension::ALL {
                if let Some(q) = row[dim.index()] {
                    w.write_record([id.as_str(), dim.name(), &format!("{q:.6}")])?;
                }
            }
        }
        w.flush().map_err(|e| Error::io("<scores>", e))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn read_csv<R: Read>(reader: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
        let header = rdr.headers().map_err(|e| Error::parse(source, 1, e.to_string()))?.clone();
        if header.iter().ne(SCORES_HEADER) {
            return Err(Error::parse(source, 1, format!("expected header {}", SCORES_HEADER.join(","))));
        }
        let mut table = QScoreTable::new();
        for row in rdr.records() {
            let row = row.map_err(|e| Error::parse(source, e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = row.position().map_or(0, |p| p.line());
            let fail = |m: String| Error::parse(source, line, m);
            if row.len() != 3 {
                return Err(fail(format!("expected 3 columns, found {}", row.len())));
            }
            let dim: PerceptionDimension = row[1].parse().map_err(|e: Error| fail(e.to_string()))?;
            let q: f64 = row[2].parse().map_err(|_| fail(format!("bad score {:?}", &row[2])))?;
            table.insert(dim, &row[0], q).map_err(|e| fail(e.to_string()))?;
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f, &path.display().to_string())
    }
}
