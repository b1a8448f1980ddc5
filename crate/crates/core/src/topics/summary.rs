use std::fmt::Write as _;
use std::io::Write;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::lda::TopicModel;
use crate::corpus::{PerceptionDimension, QScoreTable};
use crate::error::{Error, Result};
use crate::eval::metrics::pearson;

/// Top words per topic, most probable first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSummary {
    pub topics: Vec<Vec<(String, f64)>>,
}

/// The `n` most probable words of every topic; equal probabilities are
/// ordered by word.
pub fn top_words(model: &TopicModel, n: usize) -> Result<TopicSummary> {
    if n == 0 || n > model.vocab_size() {
        return Err(Error::InvalidInput(format!("cannot list {n} top words from a vocabulary of {}", model.vocab_size())));
    }
    let phi = model.phi();
    let topics = phi
        .rows()
        .into_iter()
        .map(|row| {
            let mut idx: Vec<usize> = (0..row.len()).collect();
            idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then_with(|| model.vocabulary[a].cmp(&model.vocabulary[b])));
            idx.into_iter().take(n).map(|w| (model.vocabulary[w].clone(), row[w])).collect()
        })
        .collect();
    Ok(TopicSummary { topics })
}

pub fn topic_label(k: usize) -> String {
    format!("Topic{}", k + 1)
}

impl TopicSummary {
    /// `topic_id,rank,word,probability`, topic ids and ranks counted from 1.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["topic_id", "rank", "word", "probability"])?;
        for (k, words) in self.topics.iter().enumerate() {
            for (r, (word, p)) in words.iter().enumerate() {
                w.write_record([(k + 1).to_string(), (r + 1).to_string(), word.clone(), format!("{p:.6}")])?;
            }
        }
        w.flush().map_err(|e| Error::io("<topic csv>", e))?;
        Ok(())
    }

    /// Tab-separated grid: an `ID` header naming the topics, then one
    /// `Word` row and one `Prob` row per rank.
    pub fn render_text(&self) -> String {
        let mut s = String::from("ID");
        for k in 0..self.topics.len() {
            let _ = write!(s, "\t{}", topic_label(k));
        }
        s.push('\n');
        let ranks = self.topics.iter().map(Vec::len).max().unwrap_or(0);
        for r in 0..ranks {
            s.push_str("Word");
            for t in &self.topics {
                match t.get(r) {
                    Some((w, _)) => {
                        let _ = write!(s, "\t\"{w}\"");
                    }
                    None => s.push('\t'),
                }
            }
            s.push_str("\nProb");
            for t in &self.topics {
                match t.get(r) {
                    Some((_, p)) => {
                        let _ = write!(s, "\t{p:.2}");
                    }
                    None => s.push('\t'),
                }
            }
            s.push('\n');
        }
        s
    }
}

/// A labelled correlation matrix. Cells whose correlation is undefined
/// (a constant input) hold 0 and are flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub values: Array2<f64>,
    pub degenerate: Array2<bool>,
}

impl CorrelationMatrix {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![String::new()];
        header.extend(self.cols.iter().cloned());
        w.write_record(&header)?;
        for (i, label) in self.rows.iter().enumerate() {
            let mut row = vec![label.clone()];
            row.extend(self.values.row(i).iter().map(|v| format!("{v:.6}")));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<correlation csv>", e))?;
        Ok(())
    }
}

fn corr(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Result<(f64, bool)> {
    let (a, b) = (a.to_vec(), b.to_vec());
    Ok(match pearson(&a, &b)? {
        Some(r) => (r, false),
        None => (0.0, true),
    })
}

/// Pearson correlation between the columns of θ across documents.
pub fn topic_topic_correlation(model: &TopicModel) -> Result<CorrelationMatrix> {
    if model.n_docs() < 3 {
        return Err(Error::Degenerate(format!("topic correlation needs at least 3 documents, got {}", model.n_docs())));
    }
    let theta = model.theta();
    let k = model.k;
    let mut values = Array2::zeros((k, k));
    let mut degenerate = Array2::from_elem((k, k), false);
    for i in 0..k {
        values[[i, i]] = 1.0;
        for j in i + 1..k {
            let (r, flag) = corr(theta.column(i), theta.column(j))?;
            values[[i, j]] = r;
            values[[j, i]] = r;
            degenerate[[i, j]] = flag;
            degenerate[[j, i]] = flag;
        }
    }
    let labels: Vec<String> = (0..k).map(topic_label).collect();
    Ok(CorrelationMatrix { rows: labels.clone(), cols: labels, values, degenerate })
}

/// Pearson correlation between each θ column and each dimension's scores,
/// over the documents that have a score in that dimension.
pub fn topic_perception_correlation(model: &TopicModel, scores: &QScoreTable) -> Result<CorrelationMatrix> {
    let theta = model.theta();
    let mut values = Array2::zeros((model.k, 6));
    let mut degenerate = Array2::from_elem((model.k, 6), false);
    let mut joined_any = false;
    for dim in PerceptionDimension::ALL {
        let (rows, y): (Vec<usize>, Vec<f64>) = model
            .doc_ids
            .iter()
            .enumerate()
            .filter_map(|(d, id)| scores.get(dim, id).map(|q| (d, q)))
            .unzip();
        if rows.is_empty() {
            for k in 0..model.k {
                degenerate[[k, dim.index()]] = true;
            }
            continue;
        }
        joined_any = true;
        for k in 0..model.k {
            let x: Vec<f64> = rows.iter().map(|&d| theta[[d, k]]).collect();
            match pearson(&x, &y)? {
                Some(r) => values[[k, dim.index()]] = r,
                None => degenerate[[k, dim.index()]] = true,
            }
        }
    }
    if !joined_any {
        return Err(Error::InvalidInput("no topic document has a perception score".into()));
    }
    Ok(CorrelationMatrix {
        rows: (0..model.k).map(topic_label).collect(),
        cols: PerceptionDimension::ALL.iter().map(|d| d.to_string()).collect(),
        values,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CaptionDocument;
    use crate::topics::{build_bow, fit_lda, LdaConfig};
    use rand::Rng as _;
    use std::collections::BTreeSet;

    fn model(texts: &[&str], k: usize) -> TopicModel {
        let docs: Vec<CaptionDocument> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| CaptionDocument::new(format!("d{i}"), vec![t.to_string(); 5]).unwrap())
            .collect();
        let c = build_bow(&docs, &BTreeSet::new(), 1).unwrap();
        fit_lda(&c, &LdaConfig { topics: k, iterations: 20, seed: 3, ..LdaConfig::default() }).unwrap()
    }

    fn oracle_pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
        let sab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let saa: f64 = a.iter().map(|x| x * x).sum();
        let sbb: f64 = b.iter().map(|x| x * x).sum();
        (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt())
    }

    #[test]
    fn repeated_word_ranks_first() {
        let mut m = model(&["oak oak oak", "tram brick"], 2);
        m.n_kw.fill(0);
        m.n_k.fill(0);
        m.n_kw[[0, 1]] = 15;
        m.n_k[0] = 15;
        let s = top_words(&m, 3).unwrap();
        let v = m.vocab_size() as f64;
        assert_eq!(s.topics[0][0].0, "oak");
        let expected = 1.0 - (v - 1.0) * m.beta / (15.0 + v * m.beta);
        assert!((s.topics[0][0].1 - expected).abs() < 1e-12);
        assert_eq!(s.topics[1].iter().map(|(w, _)| w.as_str()).collect::<Vec<_>>(), vec!["brick", "oak", "tram"]);
    }

    #[test]
    fn top_word_is_phi_argmax_and_descending() {
        let m = model(&["oak tram brick tram", "oak oak maple", "brick steel glass tram", "lawn fern oak"], 3);
        let s = top_words(&m, 4).unwrap();
        for (k, t) in s.topics.iter().enumerate() {
            let mut best = (0, f64::NEG_INFINITY);
            for w in 0..m.vocab_size() {
                let p = (m.n_kw[[k, w]] as f64 + m.beta) / (m.n_k[k] as f64 + m.vocab_size() as f64 * m.beta);
                if p > best.1 {
                    best = (w, p);
                }
            }
            assert_eq!(t[0].0, m.vocabulary[best.0]);
            assert!(t.windows(2).all(|p| p[0].1 >= p[1].1));
            assert!(t.iter().all(|(_, p)| *p > 0.0 && *p < 1.0));
        }
        assert!(top_words(&m, m.vocab_size() + 1).is_err());
    }

    #[test]
    fn summary_csv_and_text_shapes() {
        let s = TopicSummary { topics: vec![vec![("road".into(), 0.28), ("tree".into(), 0.181)], vec![("car".into(), 0.5), ("park".into(), 0.25)]] };
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "topic_id,rank,word,probability\n1,1,road,0.280000\n1,2,tree,0.181000\n2,1,car,0.500000\n2,2,park,0.250000\n"
        );
        assert_eq!(s.render_text(), "ID\tTopic1\tTopic2\nWord\t\"road\"\t\"car\"\nProb\t0.28\t0.50\nWord\t\"tree\"\t\"park\"\nProb\t0.18\t0.25\n");
    }

    #[test]
    fn topic_correlation_matches_oracle() {
        let mut m = model(&["oak tram", "brick tram", "oak oak", "maple brick", "steel tram oak"], 3);
        let mut rng = crate::seed::rng(8);
        for v in m.n_dk.iter_mut() {
            *v = rng.random_range(0..6);
        }
        for d in 0..m.n_docs() {
            let len = m.n_dk.row(d).sum() as usize;
            m.words[d] = vec![0; len];
        }
        let c = topic_topic_correlation(&m).unwrap();
        let theta = m.theta();
        for i in 0..3 {
            assert_eq!(c.values[[i, i]], 1.0);
            for j in 0..3 {
                if i != j {
                    let o = oracle_pearson(&theta.column(i).to_vec(), &theta.column(j).to_vec());
                    assert!((c.values[[i, j]] - o).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn identical_columns_correlate_fully() {
        let mut m = model(&["oak tram", "brick tram", "oak oak"], 2);
        for (d, counts) in [[1u32, 1], [3, 3], [0, 0]].iter().enumerate() {
            m.n_dk[[d, 0]] = counts[0];
            m.n_dk[[d, 1]] = counts[1];
            m.words[d] = vec![0; (counts[0] + counts[1]) as usize];
        }
        m.words[2] = vec![0; 4];
        let c = topic_topic_correlation(&m).unwrap();
        assert!((c.values[[0, 1]] - 1.0).abs() < 1e-12);
        let small = model(&["oak", "tram"], 2);
        assert!(topic_topic_correlation(&small).is_err());
    }

    #[test]
    fn perception_correlation_cases() {
        let m = model(&["oak tram", "brick tram", "oak oak", "maple brick"], 2);
        let theta = m.theta();
        let mut table = QScoreTable::new();
        for (d, id) in m.doc_ids.iter().enumerate() {
            table.insert(PerceptionDimension::Beautiful, id, 2.0 + 3.0 * theta[[d, 0]]).unwrap();
            table.insert(PerceptionDimension::Safe, id, 5.0).unwrap();
            table.insert(PerceptionDimension::Lively, id, (d as f64 * 1.7).sin() + 5.0).unwrap();
        }
        let c = topic_perception_correlation(&m, &table).unwrap();
        assert!((c.values[[0, 0]] - 1.0).abs() < 1e-12);
        assert_eq!(c.values[[0, 1]], 0.0);
        assert!(c.degenerate[[0, 1]] && c.degenerate[[1, 1]]);
        assert!(c.degenerate[[0, 2]]);
        let lively: Vec<f64> = (0..4).map(|d| (d as f64 * 1.7).sin() + 5.0).collect();
        let o = oracle_pearson(&theta.column(1).to_vec(), &lively);
        assert!((c.values[[1, 5]] - o).abs() < 1e-12);
        assert!(topic_perception_correlation(&m, &QScoreTable::new()).is_err());
    }

    #[test]
    fn correlation_csv_has_labels() {
        let m = model(&["oak tram", "brick tram", "oak oak"], 2);
        let c = topic_topic_correlation(&m).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(",Topic1,Topic2\nTopic1,1.000000,"));
    }
}
