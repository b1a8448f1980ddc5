//! Images, pairwise votes, captions, and the scored caption corpus.
//!
//! The flow is `load_votes` → `tally` → `q_score` per dimension, then
//! `join_dataset` with `load_captions`, then `split` into train/test.

mod captions;
mod dataset;
mod qscore;
mod votes;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use captions::{load_captions, parse_captions, write_captions, CaptionDocument, CAPTIONS_PER_IMAGE};
pub use dataset::{id_set_hash, join_dataset, split, JoinDrops, LabeledCorpus, LabeledEntry, Split};
pub use qscore::{q_score, QScoreTable};
pub use votes::{load_votes, parse_votes, tally, write_votes, ImageTally, Outcome, VoteRecord, WinLossTally};

/// The six perceptual dimensions, in canonical report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PerceptionDimension {
    Beautiful,
    Safe,
    Wealthy,
    Depressing,
    Boring,
    Lively,
}

impl PerceptionDimension {
    pub const ALL: [PerceptionDimension; 6] = [
        PerceptionDimension::Beautiful,
        PerceptionDimension::Safe,
        PerceptionDimension::Wealthy,
        PerceptionDimension::Depressing,
        PerceptionDimension::Boring,
        PerceptionDimension::Lively,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            PerceptionDimension::Beautiful => "beautiful",
            PerceptionDimension::Safe => "safe",
            PerceptionDimension::Wealthy => "wealthy",
            PerceptionDimension::Depressing => "depressing",
            PerceptionDimension::Boring => "boring",
            PerceptionDimension::Lively => "lively",
        }
    }

    /// Capitalized column heading.
    pub fn title(self) -> &'static str {
        match self {
            PerceptionDimension::Beautiful => "Beautiful",
            PerceptionDimension::Safe => "Safe",
            PerceptionDimension::Wealthy => "Wealthy",
            PerceptionDimension::Depressing => "Depressing",
            PerceptionDimension::Boring => "Boring",
            PerceptionDimension::Lively => "Lively",
        }
    }
}

impl fmt::Display for PerceptionDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PerceptionDimension {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PerceptionDimension::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown perception dimension {s:?}")))
    }
}

/// Street-view image metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub latitude: f64,
    pub longitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub city: Option<String>,
}

impl ImageRecord {
    pub fn new(image_id: impl Into<String>, latitude: f64, longitude: f64, city: Option<String>) -> Result<Self> {
        let image_id = image_id.into();
        if image_id.is_empty() {
            return Err(Error::InvalidInput("empty image id".into()));
        }
        if !(-90.0..=90.0).contains(&latitude) {
            return Err(Error::InvalidInput(format!("latitude {latitude} out of range for {image_id}")));
        }
        if !(-180.0..=180.0).contains(&longitude) {
            return Err(Error::InvalidInput(format!("longitude {longitude} out of range for {image_id}")));
        }
        Ok(ImageRecord {
            image_id,
            latitude,
            longitude,
            city,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_names_roundtrip_in_canonical_order() {
        let names: Vec<_> = PerceptionDimension::ALL.iter().map(|d| d.name()).collect();
        assert_eq!(names, ["beautiful", "safe", "wealthy", "depressing", "boring", "lively"]);
        for d in PerceptionDimension::ALL {
            assert_eq!(d.name().parse::<PerceptionDimension>().unwrap(), d);
            assert_eq!(PerceptionDimension::ALL[d.index()], d);
        }
        assert!("safety".parse::<PerceptionDimension>().is_err());
    }

    #[test]
    fn image_record_bounds() {
        assert!(ImageRecord::new("a", 90.0, -180.0, None).is_ok());
        assert!(ImageRecord::new("a", 90.1, 0.0, None).is_err());
        assert!(ImageRecord::new("a", 0.0, 180.5, None).is_err());
        assert!(ImageRecord::new("", 0.0, 0.0, None).is_err());
    }
}
