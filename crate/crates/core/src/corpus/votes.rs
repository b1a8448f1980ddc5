use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PerceptionDimension;
use crate::error::{Error, Result};

pub const VOTES_HEADER: [&str; 4] = ["left_id", "right_id", "dimension", "outcome"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Left,
    Right,
    Tie,
}

impl std::str::FromStr for Outcome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Outcome::Left),
            "right" => Ok(Outcome::Right),
            "tie" => Ok(Outcome::Tie),
            other => Err(Error::InvalidInput(format!("unknown outcome {other:?}"))),
        }
    }
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Left => "left",
            Outcome::Right => "right",
            Outcome::Tie => "tie",
        }
    }
}

/// One crowdsourced answer to "which place looks more <dimension>?".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub left_id: String,
    pub right_id: String,
    pub dimension: PerceptionDimension,
    pub outcome: Outcome,
}

impl VoteRecord {
    pub fn new(
        left_id: impl Into<String>,
        right_id: impl Into<String>,
        dimension: PerceptionDimension,
        outcome: Outcome,
    ) -> Result<Self> {
        let (left_id, right_id) = (left_id.into(), right_id.into());
        if left_id == right_id {
            return Err(Error::InvalidInput(format!("vote compares {left_id} with itself")));
        }
        if left_id.is_empty() || right_id.is_empty() {
            return Err(Error::InvalidInput("empty image id in vote".into()));
        }
        Ok(VoteRecord {
            left_id,
            right_id,
            dimension,
            outcome,
        })
    }
}

pub fn load_votes(path: &Path) -> Result<Vec<VoteRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_votes(file, &path.display().to_string())
}

/// Parse `left_id,right_id,dimension,outcome` CSV. Errors carry the 1-based
/// file line (the header is line 1).
pub fn parse_votes<R: Read>(reader: R, source: &str) -> Result<Vec<VoteRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::parse(source, 1, e.to_string()))?
        .clone();
    if header.iter().ne(VOTES_HEADER) {
        return Err(Error::parse(
            source,
            1,
            format!("expected header {:?}, got {:?}", VOTES_HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut votes = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::parse(source, line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let fail = |m: String| Error::parse(source, line, m);
        if row.len() != 4 {
            return Err(fail(format!("expected 4 columns, found {}", row.len())));
        }
        let dimension = row[2].parse().map_err(|e: Error| fail(e.to_string()))?;
        let outcome = row[3].parse().map_err(|e: Error| fail(e.to_string()))?;
        let vote = VoteRecord::new(&row[0], &row[1], dimension, outcome).map_err(|e| fail(e.to_string()))?;
        votes.push(vote);
    }
    Ok(votes)
}

pub fn write_votes<W: Write>(out: W, votes: &[VoteRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(VOTES_HEADER)?;
    for v in votes {
        w.write_record([v.left_id.as_str(), v.right_id.as_str(), v.dimension.name(), v.outcome.name()])?;
    }
    w.flush().map_err(|e| Error::io("<votes csv>", e))?;
    Ok(())
}

/// Win/loss/tie bookkeeping for one image in one dimension.
///
/// `beaten` and `beaten_by` hold distinct opponent ids; repeated votes
/// between the same pair raise the counts but not the set sizes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ImageTally {
    pub wins: u64,
    pub losses: u64,
    pub ties: u64,
    pub beaten: BTreeSet<String>,
    pub beaten_by: BTreeSet<String>,
}

impl ImageTally {
    pub fn total(&self) -> u64 {
        self.wins + self.losses + self.ties
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WinLossTally {
    pub dimension: PerceptionDimension,
    pub images: BTreeMap<String, ImageTally>,
}

pub fn tally(votes: &[VoteRecord], dimension: PerceptionDimension) -> WinLossTally {
    let mut images: BTreeMap<String, ImageTally> = BTreeMap::new();
    for v in votes.iter().filter(|v| v.dimension == dimension) {
        let (winner, loser) = match v.outcome {
            Outcome::Left => (&v.left_id, &v.right_id),
            Outcome::Right => (&v.right_id, &v.left_id),
            Outcome::Tie => {
                images.entry(v.left_id.clone()).or_default().ties += 1;
                images.entry(v.right_id.clone()).or_default().ties += 1;
                continue;
            }
        };
        let w = images.entry(winner.clone()).or_default();
        w.wins += 1;
        w.beaten.insert(loser.clone());
        let l = images.entry(loser.clone()).or_default();
        l.losses += 1;
        l.beaten_by.insert(winner.clone());
    }
    WinLossTally { dimension, images }
}
