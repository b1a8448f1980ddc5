use ndarray::{Array1, Array2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::bow::BowCorpus;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    pub topics: usize,
    /// Document-topic smoothing; `None` means `50 / topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig { topics: 9, alpha: None, beta: 0.01, iterations: 1000, seed: 0 }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.topics as f64)
    }
}

/// Collapsed-Gibbs LDA state.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub vocabulary: Vec<String>,
    pub doc_ids: Vec<String>,
    /// Word id of every token position.
    pub words: Vec<Vec<usize>>,
    /// Topic of every token position.
    pub z: Vec<Vec<usize>>,
    pub n_kw: Array2<u32>,
    pub n_dk: Array2<u32>,
    pub n_k: Array1<u32>,
    pub sweeps: usize,
}

impl TopicModel {
    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    /// Recount from `z` and compare with the stored count matrices.
    pub fn check_counts(&self) -> Result<()> {
        let mut kw = Array2::<u32>::zeros(self.n_kw.dim());
        let mut dk = Array2::<u32>::zeros(self.n_dk.dim());
        for (d, (ws, zs)) in self.words.iter().zip(&self.z).enumerate() {
            for (&w, &k) in ws.iter().zip(zs) {
                kw[[k, w]] += 1;
                dk[[d, k]] += 1;
            }
        }
        if kw != self.n_kw || dk != self.n_dk {
            return Err(Error::Numerical("topic count matrices disagree with assignments".into()));
        }
        for k in 0..self.k {
            if self.n_kw.row(k).sum() != self.n_k[k] {
                return Err(Error::Numerical(format!("topic {k}: word counts do not sum to n_k")));
            }
        }
        for (d, ws) in self.words.iter().enumerate() {
            if self.n_dk.row(d).sum() as usize != ws.len() {
                return Err(Error::Numerical(format!("document {d}: topic counts do not sum to its length")));
            }
        }
        Ok(())
    }

    /// `φ[k][w] = (n_kw + β) / (n_k + Vβ)`.
    pub fn phi(&self) -> Array2<f64> {
        let vb = self.vocab_size() as f64 * self.beta;
        Array2::from_shape_fn(self.n_kw.dim(), |(k, w)| (self.n_kw[[k, w]] as f64 + self.beta) / (self.n_k[k] as f64 + vb))
    }

    /// `θ[d][k] = (n_dk + α) / (len_d + Kα)`.
    pub fn theta(&self) -> Array2<f64> {
        let ka = self.k as f64 * self.alpha;
        Array2::from_shape_fn(self.n_dk.dim(), |(d, k)| {
            (self.n_dk[[d, k]] as f64 + self.alpha) / (self.words[d].len() as f64 + ka)
        })
    }

    fn sweep(&mut self, rng: &mut seed::Rng, p: &mut [f64]) {
        let vb = self.vocab_size() as f64 * self.beta;
        for d in 0..self.words.len() {
            for i in 0..self.words[d].len() {
                let w = self.words[d][i];
                let old = self.z[d][i];
                self.n_kw[[old, w]] -= 1;
                self.n_dk[[d, old]] -= 1;
                self.n_k[old] -= 1;
                let mut total = 0.0;
                for (k, pk) in p.iter_mut().enumerate() {
                    *pk = (self.n_dk[[d, k]] as f64 + self.alpha) * (self.n_kw[[k, w]] as f64 + self.beta)
                        / (self.n_k[k] as f64 + vb);
                    total += *pk;
                }
                let mut u = rng.random::<f64>() * total;
                let mut new = self.k - 1;
                for (k, &pk) in p.iter().enumerate() {
                    if u < pk {
                        new = k;
                        break;
                    }
                    u -= pk;
                }
                self.z[d][i] = new;
                self.n_kw[[new, w]] += 1;
                self.n_dk[[d, new]] += 1;
                self.n_k[new] += 1;
            }
        }
        self.sweeps += 1;
    }
}

pub fn fit_lda(corpus: &BowCorpus, config: &LdaConfig) -> Result<TopicModel> {
    fit_lda_observed(corpus, config, |_| Ok(()))
}

/// [`fit_lda`], calling `after_sweep` once the topic assignments of every
/// token have been resampled. An error from the observer aborts the fit.
pub fn fit_lda_observed(
    corpus: &BowCorpus,
    config: &LdaConfig,
    mut after_sweep: impl FnMut(&TopicModel) -> Result<()>,
) -> Result<TopicModel> {
    let k = config.topics;
    if k < 2 {
        return Err(Error::InvalidInput(format!("LDA needs at least 2 topics, got {k}")));
    }
    let alpha = config.alpha();
    if !(alpha > 0.0 && config.beta > 0.0) {
        return Err(Error::InvalidInput("LDA smoothing parameters must be positive".into()));
    }
    if corpus.n_docs() == 0 || corpus.vocab_size() == 0 {
        return Err(Error::Degenerate("LDA on an empty corpus".into()));
    }
    let mut rng = seed::rng(config.seed);
    let words: Vec<Vec<usize>> = (0..corpus.n_docs()).map(|d| corpus.tokens(d)).collect();
    let mut model = TopicModel {
        k,
        alpha,
        beta: config.beta,
        seed: config.seed,
        vocabulary: corpus.vocabulary.clone(),
        doc_ids: corpus.doc_ids.clone(),
        z: Vec::with_capacity(words.len()),
        n_kw: Array2::zeros((k, corpus.vocab_size())),
        n_dk: Array2::zeros((words.len(), k)),
        n_k: Array1::zeros(k),
        words,
        sweeps: 0,
    };
    for d in 0..model.words.len() {
        let zs: Vec<usize> = model.words[d].iter().map(|_| rng.random_range(0..k)).collect();
        for (&w, &t) in model.words[d].iter().zip(&zs) {
            model.n_kw[[t, w]] += 1;
            model.n_dk[[d, t]] += 1;
            model.n_k[t] += 1;
        }
        model.z.push(zs);
    }
    let mut p = vec![0.0; k];
    for _ in 0..config.iterations {
        model.sweep(&mut rng, &mut p);
        after_sweep(&model)?;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CaptionDocument;
    use crate::topics::bow::build_bow;
    use std::collections::BTreeSet;

    fn bow(texts: &[&str]) -> BowCorpus {
        let docs: Vec<CaptionDocument> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| CaptionDocument::new(format!("d{i}"), vec![t.to_string(); 5]).unwrap())
            .collect();
        build_bow(&docs, &BTreeSet::new(), 1).unwrap()
    }

    fn cfg(k: usize, iterations: usize, seed: u64) -> LdaConfig {
        LdaConfig { topics: k, iterations, seed, ..LdaConfig::default() }
    }

    #[test]
    fn single_token_phi_is_forced() {
        let mut c = bow(&["tree"]);
        c.counts[0] = vec![(0, 1)];
        let m = fit_lda(&c, &cfg(2, 10, 1)).unwrap();
        let k = m.z[0][0];
        let expected = (1.0 + 0.01) / (1.0 + 1.0 * 0.01);
        assert!((m.phi()[[k, 0]] - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_iterations_is_the_seeded_initialization() {
        let c = bow(&["oak tram brick", "oak oak tram"]);
        let a = fit_lda(&c, &cfg(3, 0, 5)).unwrap();
        let mut rng = seed::rng(5);
        for (d, zs) in a.z.iter().enumerate() {
            for (i, &z) in zs.iter().enumerate() {
                assert_eq!(z, rng.random_range(0..3), "doc {d} token {i}");
            }
        }
        assert_eq!(a.sweeps, 0);
        a.check_counts().unwrap();
    }

    #[test]
    fn counts_hold_after_every_sweep_and_rows_normalize() {
        let c = bow(&["oak tram brick tram", "oak oak maple", "brick steel glass tram", "lawn"]);
        let mut seen = 0;
        let m = fit_lda_observed(&c, &cfg(3, 50, 2), |m| {
            seen += 1;
            m.check_counts()
        })
        .unwrap();
        assert_eq!(seen, 50);
        for row in m.phi().rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
        for row in m.theta().rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn same_seed_same_assignments() {
        let c = bow(&["oak tram brick tram", "oak oak maple", "brick steel glass tram"]);
        assert_eq!(fit_lda(&c, &cfg(3, 30, 9)).unwrap(), fit_lda(&c, &cfg(3, 30, 9)).unwrap());
        assert_ne!(fit_lda(&c, &cfg(3, 30, 9)).unwrap().z, fit_lda(&c, &cfg(3, 30, 10)).unwrap().z);
    }

    #[test]
    fn sweep_matches_conditional_oracle() {
        // Replays one token update with an independently written conditional.
        let c = bow(&["oak tram brick tram", "oak oak maple"]);
        let m0 = fit_lda(&c, &cfg(3, 0, 4)).unwrap();
        let m1 = fit_lda(&c, &cfg(3, 1, 4)).unwrap();
        let mut rng = seed::rng(4);
        for zs in &m0.words {
            for _ in zs {
                let _: usize = rng.random_range(0..3);
            }
        }
        let (mut kw, mut dk, mut nk, mut z) = (m0.n_kw.clone(), m0.n_dk.clone(), m0.n_k.clone(), m0.z.clone());
        let v = m0.vocab_size() as f64;
        for d in 0..z.len() {
            for i in 0..z[d].len() {
                let w = m0.words[d][i];
                let old = z[d][i];
                kw[[old, w]] -= 1;
                dk[[d, old]] -= 1;
                nk[old] -= 1;
                let weights: Vec<f64> = (0..3)
                    .map(|k| (dk[[d, k]] as f64 + m0.alpha) * (kw[[k, w]] as f64 + m0.beta) / (nk[k] as f64 + v * m0.beta))
                    .collect();
                let u: f64 = rng.random::<f64>() * weights.iter().sum::<f64>();
                let mut acc = 0.0;
                let new = weights.iter().position(|p| {
                    acc += p;
                    u < acc
                });
                let new = new.unwrap_or(2);
                z[d][i] = new;
                kw[[new, w]] += 1;
                dk[[d, new]] += 1;
                nk[new] += 1;
            }
        }
        assert_eq!(z, m1.z);
    }

    #[test]
    fn rejects_bad_configs() {
        let c = bow(&["oak"]);
        assert!(fit_lda(&c, &cfg(1, 1, 0)).is_err());
        let bad = LdaConfig { beta: 0.0, ..cfg(2, 1, 0) };
        assert!(fit_lda(&c, &bad).is_err());
    }

    #[test]
    fn recovers_disjoint_topics() {
        use crate::synthetic::{topic_corpus, TOPIC_VOCABULARY};
        let docs = topic_corpus(300, 21);
        let c = build_bow(&docs, &crate::topics::default_stopwords(), 1).unwrap();
        let m = fit_lda(&c, &LdaConfig { topics: 3, iterations: 200, seed: 1, ..LdaConfig::default() }).unwrap();
        let s = crate::topics::top_words(&m, 5).unwrap();
        for truth in TOPIC_VOCABULARY {
            let best = s
                .topics
                .iter()
                .map(|t| t.iter().filter(|(w, _)| truth[..5].contains(&w.as_str())).count())
                .max()
                .unwrap();
            assert!(best >= 4, "{truth:?} vs {:?}", s.topics);
        }
    }
}
