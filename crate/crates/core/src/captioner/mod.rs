//! Toy caption decoder: an LSTM seeded by a projected image feature,
//! emitting one softmax over the vocabulary per step.
//!
//! Unrolling for a reference `w_1 .. w_N`:
//!
//! ```text
//! x_-1 = W_f f + b_f          (state update only, nothing emitted)
//! x_0  = E[begin]             -> p_1 scores w_1
//! x_t  = E[w_t]               -> p_{t+1} scores w_{t+1}, and p_{N+1} scores [end]
//! ```

pub mod persist;
pub mod train;

use std::collections::{BTreeSet, HashMap};

use ndarray::{Array1, Array2, ArrayView1};
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

pub use train::{nll_and_gradients, train_captioner, CaptionerConfig, CaptionerGrads, TrainedCaptioner};

use crate::error::{Error, Result};
use crate::seed::Rng;
use crate::text;

pub const BEGIN: usize = 0;
pub const END: usize = 1;
pub const UNK: usize = 2;
pub const PAD: usize = 3;
const RESERVED: [&str; 4] = ["[begin]", "[end]", "[UNK]", "[PAD]"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct TokenVocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for TokenVocabulary {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        TokenVocabulary { tokens, index }
    }
}

impl From<TokenVocabulary> for Vec<String> {
    fn from(v: TokenVocabulary) -> Self {
        v.tokens
    }
}

impl TokenVocabulary {
    /// Reserved tokens, then every word of `texts` in lexicographic order.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let words: BTreeSet<String> = texts.into_iter().flat_map(text::words).collect();
        let tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).chain(words).collect();
        tokens.into()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map_or(RESERVED[UNK], String::as_str)
    }

    pub fn encode(&self, caption: &str) -> Vec<usize> {
        text::words(caption).iter().map(|w| self.id(w)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter().map(|&i| self.token(i)).collect::<Vec<_>>().join(" ")
    }
}

/// Gate weights stacked in the order input, forget, output, candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// 4H × E
    pub w_x: Array2<f64>,
    /// 4H × H
    pub w_h: Array2<f64>,
    /// 4H
    pub b: Array1<f64>,
}

impl LstmParams {
    pub fn hidden_size(&self) -> usize {
        self.w_h.ncols()
    }

    pub fn input_size(&self) -> usize {
        self.w_x.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputProjection {
    /// H × V
    pub w: Array2<f64>,
    /// V
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Array1<f64>,
    pub c: Array1<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: Array1::zeros(hidden),
            c: Array1::zeros(hidden),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Gate activations of one step, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub x: Array1<f64>,
    pub h_prev: Array1<f64>,
    pub c_prev: Array1<f64>,
    pub i: Array1<f64>,
    pub f: Array1<f64>,
    pub o: Array1<f64>,
    pub g: Array1<f64>,
    pub c: Array1<f64>,
    pub h: Array1<f64>,
}

pub(crate) fn lstm_forward(x: ArrayView1<f64>, state: &LstmState, p: &LstmParams) -> StepCache {
    let hs = p.hidden_size();
    let z = p.w_x.dot(&x) + p.w_h.dot(&state.h) + &p.b;
    let i = z.slice(ndarray::s![0..hs]).mapv(sigmoid);
    let f = z.slice(ndarray::s![hs..2 * hs]).mapv(sigmoid);
    let o = z.slice(ndarray::s![2 * hs..3 * hs]).mapv(sigmoid);
    let g = z.slice(ndarray::s![3 * hs..4 * hs]).mapv(f64::tanh);
    let c = &f * &state.c + &i * &g;
    let h = &o * &c.mapv(f64::tanh);
    StepCache {
        x: x.to_owned(),
        h_prev: state.h.clone(),
        c_prev: state.c.clone(),
        i,
        f,
        o,
        g,
        c,
        h,
    }
}

/// One LSTM cell update.
pub fn lstm_step(x: ArrayView1<f64>, state: &LstmState, params: &LstmParams) -> Result<LstmState> {
    let (hs, e) = (params.hidden_size(), params.input_size());
    if x.len() != e || state.h.len() != hs || state.c.len() != hs || params.w_x.nrows() != 4 * hs || params.b.len() != 4 * hs {
        return Err(Error::Shape(format!(
            "LSTM step with input {} and state {}/{} against E={e}, H={hs}",
            x.len(),
            state.h.len(),
            state.c.len()
        )));
    }
    let s = lstm_forward(x, state, params);
    Ok(LstmState { h: s.h, c: s.c })
}

/// Softmax of `W_p^T h + b_p`.
pub fn step_distribution(h: ArrayView1<f64>, proj: &OutputProjection) -> Array1<f64> {
    let mut z = h.dot(&proj.w) + &proj.b;
    let max = z.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    z.mapv_inplace(|v| (v - max).exp());
    let sum = z.sum();
    z /= sum;
    z
}

/// Embedding table, feature projection, LSTM and output projection.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptionModel {
    pub vocab: TokenVocabulary,
    /// V × E
    pub embedding: Array2<f64>,
    /// E × d_f
    pub feature_w: Array2<f64>,
    /// E
    pub feature_b: Array1<f64>,
    pub lstm: LstmParams,
    pub proj: OutputProjection,
}

impl CaptionModel {
    /// Every parameter uniform in [-0.1, 0.1].
    pub fn new(vocab: TokenVocabulary, feature_dim: usize, embed: usize, hidden: usize, rng: &mut Rng) -> Self {
        let u = Uniform::new_inclusive(-0.1, 0.1).unwrap();
        let v = vocab.len();
        let mut m = |r: usize, c: usize| Array2::from_shape_simple_fn((r, c), || u.sample(rng));
        let embedding = m(v, embed);
        let feature_w = m(embed, feature_dim);
        let feature_b = m(1, embed).into_shape_with_order(embed).unwrap();
        let w_x = m(4 * hidden, embed);
        let w_h = m(4 * hidden, hidden);
        let b = m(1, 4 * hidden).into_shape_with_order(4 * hidden).unwrap();
        let pw = m(hidden, v);
        let pb = m(1, v).into_shape_with_order(v).unwrap();
        CaptionModel {
            vocab,
            embedding,
            feature_w,
            feature_b,
            lstm: LstmParams { w_x, w_h, b },
            proj: OutputProjection { w: pw, b: pb },
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_w.ncols()
    }

    pub fn hidden_size(&self) -> usize {
        self.lstm.hidden_size()
    }

    pub(crate) fn check_feature(&self, feature: &[f64]) -> Result<()> {
        if feature.len() != self.feature_dim() {
            return Err(Error::Shape(format!("feature of length {} for a model expecting {}", feature.len(), self.feature_dim())));
        }
        if feature.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite image feature".into()));
        }
        Ok(())
    }

    /// `x_-1`, the projected feature.
    pub(crate) fn feature_input(&self, feature: &[f64]) -> Array1<f64> {
        self.feature_w.dot(&ArrayView1::from(feature)) + &self.feature_b
    }

    /// State after consuming the projected feature.
    fn primed_state(&self, feature: &[f64]) -> LstmState {
        let s = lstm_forward(self.feature_input(feature).view(), &LstmState::zeros(self.hidden_size()), &self.lstm);
        LstmState { h: s.h, c: s.c }
    }

    /// Argmax token at every step until [end] or `max_len` tokens.
    pub fn decode_greedy(&self, feature: &[f64], max_len: usize) -> Result<Vec<usize>> {
        self.check_feature(feature)?;
        if max_len == 0 {
            return Err(Error::InvalidInput("max_len must be at least 1".into()));
        }
        let mut state = self.primed_state(feature);
        let mut token = BEGIN;
        let mut out = Vec::new();
        while out.len() < max_len {
            let s = lstm_forward(self.embedding.row(token), &state, &self.lstm);
            state = LstmState { h: s.h, c: s.c };
            let p = step_distribution(state.h.view(), &self.proj);
            token = argmax(&p);
            if token == END {
                break;
            }
            out.push(token);
        }
        Ok(out)
    }

    pub fn caption(&self, feature: &[f64], max_len: usize) -> Result<String> {
        Ok(self.vocab.decode(&self.decode_greedy(feature, max_len)?))
    }

    /// Mean of `-ln p` over the reference tokens and the closing [end].
    pub fn teacher_forced_nll(&self, feature: &[f64], reference: &[usize]) -> Result<f64> {
        self.check_feature(feature)?;
        if reference.is_empty() {
            return Err(Error::InvalidInput("empty reference caption".into()));
        }
        let v = self.vocab.len();
        let mut state = self.primed_state(feature);
        let mut total = 0.0;
        let inputs = std::iter::once(BEGIN).chain(reference.iter().map(|&t| if t < v { t } else { UNK }));
        let targets = reference.iter().map(|&t| if t < v { t } else { UNK }).chain(std::iter::once(END));
        for (x, y) in inputs.zip(targets) {
            let s = lstm_forward(self.embedding.row(x), &state, &self.lstm);
            state = LstmState { h: s.h, c: s.c };
            total -= step_distribution(state.h.view(), &self.proj)[y].ln();
        }
        Ok(total / (reference.len() + 1) as f64)
    }

    pub fn is_finite(&self) -> bool {
        [&self.embedding, &self.feature_w, &self.lstm.w_x, &self.lstm.w_h, &self.proj.w]
            .iter()
            .all(|a| a.iter().all(|v| v.is_finite()))
            && [&self.feature_b, &self.lstm.b, &self.proj.b].iter().all(|a| a.iter().all(|v| v.is_finite()))
    }
}

/// Lowest index among the maxima.
fn argmax(p: &Array1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}
