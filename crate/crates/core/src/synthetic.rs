//! Seeded generators for constructed tasks with known answers.

use ndarray::Array2;
use rand::seq::IndexedRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::corpus::{CaptionDocument, LabeledEntry, Outcome, PerceptionDimension, VoteRecord, CAPTIONS_PER_IMAGE};
use crate::eval::{MigrationLocation, MigrationSet, RatingScale};
use crate::seed::{self, Rng};

const GREEN: [&str; 4] = ["trees", "flowers", "park", "garden"];
const DECAY: [&str; 4] = ["graffiti", "trash", "rubble", "ruins"];
const ADJECTIVES: [&str; 4] = ["old", "tall", "small", "wide"];
const NOUNS: [&str; 8] = ["street", "road", "building", "car", "sidewalk", "house", "wall", "sky"];
const PREPOSITIONS: [&str; 3] = ["near", "beside", "behind"];

fn pick<'a>(rng: &mut Rng, words: &[&'a str]) -> &'a str {
    words.choose(rng).unwrap()
}

/// Five captions plus the number of all-green and all-decay captions among
/// them.
pub fn marker_captions(rng: &mut Rng) -> (Vec<String>, usize, usize) {
    let (mut green, mut decay) = (0, 0);
    let mut caps = Vec::with_capacity(CAPTIONS_PER_IMAGE);
    for _ in 0..CAPTIONS_PER_IMAGE {
        let u: f64 = rng.random();
        let cap = if u < 0.3 {
            green += 1;
            format!("{} and {} near {}", pick(rng, &GREEN), pick(rng, &GREEN), pick(rng, &GREEN))
        } else if u < 0.6 {
            decay += 1;
            format!("{} and {} near {}", pick(rng, &DECAY), pick(rng, &DECAY), pick(rng, &DECAY))
        } else {
            format!(
                "a {} {} {} {}",
                pick(rng, &ADJECTIVES),
                pick(rng, &NOUNS),
                pick(rng, &PREPOSITIONS),
                pick(rng, &NOUNS)
            )
        };
        caps.push(cap);
    }
    (caps, green, decay)
}

/// Ground-truth scores for a document with `green` marker captions and
/// `decay` marker captions.
pub fn marker_scores(green: usize, decay: usize) -> [f64; 6] {
    let (p, n) = (green as f64, decay as f64);
    let l = p - n;
    [5.0 + 0.8 * l, 5.0 + 0.6 * l, 3.0 + p, 5.0 - 0.8 * l, 6.0 - 0.5 * (p + n), 4.0 + 0.7 * l]
}

/// Marker-word regression corpus.
///
/// Each caption is either three green words, three decay words, or a neutral
/// street phrase. Scores are linear in the number of green and decay
/// captions.
pub fn marker_corpus(n_docs: usize, seed: u64) -> Vec<LabeledEntry> {
    let mut rng = seed::rng(seed);
    (0..n_docs)
        .map(|i| {
            let (caps, g, d) = marker_captions(&mut rng);
            LabeledEntry {
                doc: CaptionDocument::new(format!("doc{i:05}"), caps).unwrap(),
                scores: marker_scores(g, d),
            }
        })
        .collect()
}

/// Random pairwise tournament: each vote picks two distinct images and a
/// dimension uniformly, and an outcome left / right / tie with
/// probabilities 0.45 / 0.45 / 0.1.
pub fn tournament(n_images: usize, n_votes: usize, seed: u64) -> Vec<VoteRecord> {
    assert!(n_images >= 2);
    let mut rng = seed::rng(seed);
    let ids: Vec<String> = (0..n_images).map(|i| format!("img{i:03}")).collect();
    (0..n_votes)
        .map(|_| {
            let a = rng.random_range(0..n_images);
            let mut b = rng.random_range(0..n_images - 1);
            if b >= a {
                b += 1;
            }
            let dim = PerceptionDimension::ALL[rng.random_range(0..6)];
            let u: f64 = rng.random();
            let outcome = if u < 0.45 {
                Outcome::Left
            } else if u < 0.9 {
                Outcome::Right
            } else {
                Outcome::Tie
            };
            VoteRecord::new(&ids[a], &ids[b], dim, outcome).unwrap()
        })
        .collect()
}

/// A street-scene corpus with both captions and votes.
#[derive(Debug, Clone)]
pub struct StreetCorpus {
    pub captions: Vec<CaptionDocument>,
    pub votes: Vec<VoteRecord>,
    /// The latent scores votes were drawn from, per image.
    pub latent: Vec<[f64; 6]>,
}

/// Marker captions for `n_images` images plus `votes_per_image` votes per
/// image and dimension. The left image wins with probability
/// `σ(s_left − s_right)` on the latent marker scores, after a 10% tie draw.
pub fn street_corpus(n_images: usize, votes_per_image: usize, seed: u64) -> StreetCorpus {
    assert!(n_images >= 2);
    let mut rng = seed::rng(seed);
    let mut captions = Vec::with_capacity(n_images);
    let mut latent = Vec::with_capacity(n_images);
    for i in 0..n_images {
        let (caps, g, d) = marker_captions(&mut rng);
        captions.push(CaptionDocument::new(format!("img{i:05}"), caps).unwrap());
        latent.push(marker_scores(g, d));
    }
    let mut votes = Vec::new();
    for dim in PerceptionDimension::ALL {
        for a in 0..n_images {
            for _ in 0..votes_per_image {
                let mut b = rng.random_range(0..n_images - 1);
                if b >= a {
                    b += 1;
                }
                let outcome = if rng.random::<f64>() < 0.1 {
                    Outcome::Tie
                } else {
                    let diff = latent[a][dim.index()] - latent[b][dim.index()];
                    if rng.random::<f64>() < 1.0 / (1.0 + (-diff).exp()) {
                        Outcome::Left
                    } else {
                        Outcome::Right
                    }
                };
                votes.push(VoteRecord::new(&captions[a].image_id, &captions[b].image_id, dim, outcome).unwrap());
            }
        }
    }
    StreetCorpus { captions, votes, latent }
}

pub const CAPTION_WORDS: [&str; 20] = [
    "tree", "car", "road", "house", "sky", "bus", "wall", "door", "sign", "lamp", "park", "shop", "bike", "fence", "bridge",
    "river", "tower", "bench", "truck", "roof",
];

/// Twenty (feature, caption) pairs. Caption `i` is the three words
/// `i, i+5, i+11` (mod 20); feature dimension `j` is 1 exactly when word
/// `j` occurs in the caption.
pub fn caption_pairs() -> Vec<(Vec<f64>, String)> {
    let n = CAPTION_WORDS.len();
    (0..n)
        .map(|i| {
            let words = [i, (i + 5) % n, (i + 11) % n];
            let mut f = vec![0.0; n];
            for &w in &words {
                f[w] = 1.0;
            }
            (f, words.map(|w| CAPTION_WORDS[w]).join(" "))
        })
        .collect()
}

pub const TOPIC_VOCABULARY: [[&str; 10]; 3] = [
    ["oak", "maple", "lawn", "hedge", "meadow", "fern", "pond", "willow", "moss", "tulip"],
    ["taxi", "tram", "lorry", "scooter", "van", "ferry", "coach", "cab", "moped", "wagon"],
    ["brick", "steel", "glass", "concrete", "marble", "granite", "timber", "slate", "stucco", "tile"],
];

/// Word weights within a topic: geometric decay, so the top five words are
/// well separated from the rest.
pub fn topic_word_weights() -> [f64; 10] {
    std::array::from_fn(|r| 0.7f64.powi(r as i32))
}

/// Three-topic generative corpus over disjoint vocabularies. Each document
/// draws one dominant topic with probability 0.8 per token and otherwise a
/// uniformly chosen topic; its five captions hold ten words each.
pub fn topic_corpus(n_docs: usize, seed: u64) -> Vec<CaptionDocument> {
    let mut rng = seed::rng(seed);
    let weights = topic_word_weights();
    let total: f64 = weights.iter().sum();
    let draw_word = |rng: &mut Rng, k: usize| {
        let mut u = rng.random::<f64>() * total;
        for (w, &p) in TOPIC_VOCABULARY[k].iter().zip(&weights) {
            if u < p {
                return *w;
            }
            u -= p;
        }
        TOPIC_VOCABULARY[k][9]
    };
    (0..n_docs)
        .map(|d| {
            let main = d % 3;
            let caps = (0..CAPTIONS_PER_IMAGE)
                .map(|_| {
                    (0..10)
                        .map(|_| {
                            let k = if rng.random::<f64>() < 0.8 { main } else { rng.random_range(0..3) };
                            draw_word(&mut rng, k)
                        })
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect();
            CaptionDocument::new(format!("doc{d:04}"), caps).unwrap()
        })
        .collect()
}

/// Isotropic Gaussian blobs. Returns the points and the generating blob of
/// each row; rows are interleaved (row `i` belongs to blob `i % k`).
pub fn gaussian_blobs(centers: &[Vec<f64>], per_blob: usize, sigma: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let k = centers.len();
    let dim = centers[0].len();
    let mut rng = seed::rng(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let n = k * per_blob;
    let mut x = Array2::zeros((n, dim));
    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    for (i, &c) in labels.iter().enumerate() {
        for j in 0..dim {
            x[[i, j]] = centers[c][j] + noise.sample(&mut rng);
        }
    }
    (x, labels)
}

/// `k` centers spaced `spacing` apart along distinct axes of a
/// `dim`-dimensional space (the first center at the origin).
pub fn axis_centers(k: usize, dim: usize, spacing: f64) -> Vec<Vec<f64>> {
    assert!(k <= dim + 1);
    (0..k)
        .map(|c| {
            let mut v = vec![0.0; dim];
            if c > 0 {
                v[c - 1] = spacing;
            }
            v
        })
        .collect()
}

/// Locations for a migration check: marker captions, true scores from
/// [`marker_scores`], and `n_raters` noisy ratings each on a 1 to 7 scale,
/// averaged. Returns the set and the noiseless [0, 10] scores.
pub fn migration_set(n_locations: usize, n_raters: u32, noise_sd: f64, seed: u64) -> (MigrationSet, Vec<[f64; 6]>) {
    let mut rng = seed::rng(seed);
    let noise = Normal::new(0.0, noise_sd).unwrap();
    let scale = RatingScale { min: 1.0, max: 7.0 };
    let mut truth = Vec::with_capacity(n_locations);
    let locations = (0..n_locations)
        .map(|i| {
            let (captions, g, d) = marker_captions(&mut rng);
            let t = marker_scores(g, d);
            truth.push(t);
            let ratings = PerceptionDimension::ALL
                .iter()
                .map(|&dim| {
                    let centre = scale.min + (scale.max - scale.min) * t[dim.index()] / 10.0;
                    let sum: f64 = (0..n_raters)
                        .map(|_| (centre + noise.sample(&mut rng)).clamp(scale.min, scale.max))
                        .sum();
                    (dim, sum / f64::from(n_raters))
                })
                .collect();
            MigrationLocation {
                location_id: format!("loc{i:03}"),
                latitude: 39.9 + rng.random_range(-0.1..0.1),
                longitude: 116.4 + rng.random_range(-0.1..0.1),
                captions,
                ratings,
                raters: n_raters,
            }
        })
        .collect();
    (MigrationSet { scale, locations }, truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn marker_corpus_scores_follow_caption_counts() {
        for e in marker_corpus(200, 3) {
            let g = e.doc.captions.iter().filter(|c| GREEN.iter().any(|w| c.starts_with(w))).count();
            let d = e.doc.captions.iter().filter(|c| DECAY.iter().any(|w| c.starts_with(w))).count();
            assert_eq!(e.scores, marker_scores(g, d));
            assert_eq!(e.doc.captions.len(), 5);
        }
    }

    #[test]
    fn marker_corpus_is_seeded() {
        assert_eq!(marker_corpus(30, 9), marker_corpus(30, 9));
        assert_ne!(marker_corpus(30, 9), marker_corpus(30, 10));
    }

    #[test]
    fn tournament_votes_are_valid() {
        let v = tournament(20, 500, 1);
        assert_eq!(v.len(), 500);
        assert!(v.iter().all(|r| r.left_id != r.right_id));
        assert!(v.iter().any(|r| r.outcome == Outcome::Tie));
    }

    #[test]
    fn caption_features_identify_their_words() {
        let pairs = caption_pairs();
        let distinct: BTreeSet<String> = pairs.iter().map(|(_, c)| c.clone()).collect();
        assert_eq!(distinct.len(), 20);
        for (f, c) in &pairs {
            for w in c.split(' ') {
                let j = CAPTION_WORDS.iter().position(|x| x == &w).unwrap();
                assert_eq!(f[j], 1.0);
            }
            assert_eq!(f.iter().sum::<f64>(), 3.0);
        }
    }

    #[test]
    fn street_corpus_votes_favour_higher_latent() {
        let c = street_corpus(40, 20, 2);
        let dim = PerceptionDimension::Beautiful;
        let (mut agree, mut total) = (0, 0);
        for v in c.votes.iter().filter(|v| v.dimension == dim && v.outcome != Outcome::Tie) {
            let idx = |id: &str| c.captions.iter().position(|d| d.image_id == id).unwrap();
            let (a, b) = (c.latent[idx(&v.left_id)][0], c.latent[idx(&v.right_id)][0]);
            if a != b {
                total += 1;
                agree += usize::from((a > b) == (v.outcome == Outcome::Left));
            }
        }
        assert!(agree as f64 > 0.6 * total as f64);
    }

    #[test]
    fn blobs_sit_on_their_centers() {
        let centers = axis_centers(3, 4, 20.0);
        let (x, labels) = gaussian_blobs(&centers, 50, 1.0, 4);
        for c in 0..3 {
            let rows: Vec<usize> = (0..150).filter(|&i| labels[i] == c).collect();
            for j in 0..4 {
                let mean = rows.iter().map(|&i| x[[i, j]]).sum::<f64>() / 50.0;
                assert!((mean - centers[c][j]).abs() < 0.5);
            }
        }
    }

    #[test]
    fn migration_set_is_valid_jsonl() {
        let (set, truth) = migration_set(71, 15, 0.8, 4);
        assert_eq!(set.locations.len(), 71);
        assert_eq!(truth.len(), 71);
        let mut buf = Vec::new();
        set.write(&mut buf).unwrap();
        assert_eq!(MigrationSet::parse(&buf[..], "t").unwrap(), set);
    }
}
