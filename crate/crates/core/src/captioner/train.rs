use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::{lstm_forward, step_distribution, CaptionModel, LstmState, StepCache, TokenVocabulary, BEGIN, END, UNK};
use crate::error::{Error, Result};
use crate::optim::{Optimizer, OptimizerKind};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaptionerConfig {
    pub embed: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Decode cap used by `caption`.
    pub max_len: usize,
}

impl Default for CaptionerConfig {
    fn default() -> Self {
        CaptionerConfig {
            embed: 16,
            hidden: 32,
            epochs: 300,
            learning_rate: 0.01,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            max_len: 16,
        }
    }
}

/// Gradients with the same shapes as the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptionerGrads {
    pub embedding: Array2<f64>,
    pub feature_w: Array2<f64>,
    pub feature_b: Array1<f64>,
    pub w_x: Array2<f64>,
    pub w_h: Array2<f64>,
    pub b: Array1<f64>,
    pub proj_w: Array2<f64>,
    pub proj_b: Array1<f64>,
}

impl CaptionerGrads {
    pub fn zeros_like(m: &CaptionModel) -> Self {
        CaptionerGrads {
            embedding: Array2::zeros(m.embedding.dim()),
            feature_w: Array2::zeros(m.feature_w.dim()),
            feature_b: Array1::zeros(m.feature_b.len()),
            w_x: Array2::zeros(m.lstm.w_x.dim()),
            w_h: Array2::zeros(m.lstm.w_h.dim()),
            b: Array1::zeros(m.lstm.b.len()),
            proj_w: Array2::zeros(m.proj.w.dim()),
            proj_b: Array1::zeros(m.proj.b.len()),
        }
    }

    /// Flat slices in [`CaptionModel::slices_mut`] order.
    pub fn slices(&self) -> [&[f64]; 8] {
        [
            self.embedding.as_slice().unwrap(),
            self.feature_w.as_slice().unwrap(),
            self.feature_b.as_slice().unwrap(),
            self.w_x.as_slice().unwrap(),
            self.w_h.as_slice().unwrap(),
            self.b.as_slice().unwrap(),
            self.proj_w.as_slice().unwrap(),
            self.proj_b.as_slice().unwrap(),
        ]
    }

    fn add_scaled(&mut self, other: &CaptionerGrads, k: f64) {
        self.embedding.scaled_add(k, &other.embedding);
        self.feature_w.scaled_add(k, &other.feature_w);
        self.feature_b.scaled_add(k, &other.feature_b);
        self.w_x.scaled_add(k, &other.w_x);
        self.w_h.scaled_add(k, &other.w_h);
        self.b.scaled_add(k, &other.b);
        self.proj_w.scaled_add(k, &other.proj_w);
        self.proj_b.scaled_add(k, &other.proj_b);
    }
}

impl CaptionModel {
    /// Parameter tensors as flat slices: embedding, feature weights and
    /// bias, LSTM input weights, recurrent weights and bias, output weights
    /// and bias.
    pub fn slices_mut(&mut self) -> [&mut [f64]; 8] {
        [
            self.embedding.as_slice_mut().unwrap(),
            self.feature_w.as_slice_mut().unwrap(),
            self.feature_b.as_slice_mut().unwrap(),
            self.lstm.w_x.as_slice_mut().unwrap(),
            self.lstm.w_h.as_slice_mut().unwrap(),
            self.lstm.b.as_slice_mut().unwrap(),
            self.proj.w.as_slice_mut().unwrap(),
            self.proj.b.as_slice_mut().unwrap(),
        ]
    }
}

fn outer_add(dst: &mut Array2<f64>, a: ArrayView1<f64>, b: ArrayView1<f64>) {
    for (i, &ai) in a.iter().enumerate() {
        if ai != 0.0 {
            dst.row_mut(i).scaled_add(ai, &b);
        }
    }
}

/// Backpropagate through one cell. Returns (dx, dh_prev, dc_prev).
fn lstm_backward(
    s: &StepCache,
    dh: &Array1<f64>,
    dc_next: &Array1<f64>,
    m: &CaptionModel,
    g: &mut CaptionerGrads,
) -> (Array1<f64>, Array1<f64>, Array1<f64>) {
    let hs = s.h.len();
    let tc = s.c.mapv(f64::tanh);
    let d_o = dh * &tc;
    let dc = dc_next + &(dh * &s.o * &tc.mapv(|t| 1.0 - t * t));
    let di = &dc * &s.g;
    let dg = &dc * &s.i;
    let df = &dc * &s.c_prev;
    let dc_prev = &dc * &s.f;
    let mut dz = Array1::zeros(4 * hs);
    for u in 0..hs {
        dz[u] = di[u] * s.i[u] * (1.0 - s.i[u]);
        dz[hs + u] = df[u] * s.f[u] * (1.0 - s.f[u]);
        dz[2 * hs + u] = d_o[u] * s.o[u] * (1.0 - s.o[u]);
        dz[3 * hs + u] = dg[u] * (1.0 - s.g[u] * s.g[u]);
    }
    outer_add(&mut g.w_x, dz.view(), s.x.view());
    outer_add(&mut g.w_h, dz.view(), s.h_prev.view());
    g.b += &dz;
    let dx = m.lstm.w_x.t().dot(&dz);
    let dh_prev = m.lstm.w_h.t().dot(&dz);
    (dx, dh_prev, dc_prev)
}

/// Teacher-forced NLL of one pair and its gradient with respect to every
/// parameter.
pub fn nll_and_gradients(model: &CaptionModel, feature: &[f64], reference: &[usize]) -> Result<(f64, CaptionerGrads)> {
    model.check_feature(feature)?;
    if reference.is_empty() {
        return Err(Error::InvalidInput("empty reference caption".into()));
    }
    let v = model.vocab.len();
    let clamp = |t: usize| if t < v { t } else { UNK };
    let inputs: Vec<usize> = std::iter::once(BEGIN).chain(reference.iter().map(|&t| clamp(t))).collect();
    let targets: Vec<usize> = reference.iter().map(|&t| clamp(t)).chain(std::iter::once(END)).collect();
    let n = targets.len() as f64;

    let hs = model.hidden_size();
    let x_feat = model.feature_input(feature);
    let prime = lstm_forward(x_feat.view(), &LstmState::zeros(hs), &model.lstm);
    let mut state = LstmState { h: prime.h.clone(), c: prime.c.clone() };
    let mut steps = Vec::with_capacity(inputs.len());
    let mut probs = Vec::with_capacity(inputs.len());
    let mut loss = 0.0;
    for (&x, &y) in inputs.iter().zip(&targets) {
        let s = lstm_forward(model.embedding.row(x), &state, &model.lstm);
        state = LstmState { h: s.h.clone(), c: s.c.clone() };
        let p = step_distribution(s.h.view(), &model.proj);
        loss -= p[y].ln();
        steps.push(s);
        probs.push(p);
    }
    loss /= n;

    let mut g = CaptionerGrads::zeros_like(model);
    let mut dh_next = Array1::zeros(hs);
    let mut dc_next = Array1::zeros(hs);
    for t in (0..steps.len()).rev() {
        let mut dlogits = probs[t].clone();
        dlogits[targets[t]] -= 1.0;
        dlogits /= n;
        outer_add(&mut g.proj_w, steps[t].h.view(), dlogits.view());
        g.proj_b += &dlogits;
        let dh = model.proj.w.dot(&dlogits) + &dh_next;
        let (dx, dh_prev, dc_prev) = lstm_backward(&steps[t], &dh, &dc_next, model, &mut g);
        g.embedding.row_mut(inputs[t]).scaled_add(1.0, &dx);
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
    let (dx, _, _) = lstm_backward(&prime, &dh_next, &dc_next, model, &mut g);
    outer_add(&mut g.feature_w, dx.view(), ArrayView1::from(feature));
    g.feature_b += &dx;
    Ok((loss, g))
}

fn dataset_pass(model: &CaptionModel, data: &[(Vec<f64>, Vec<usize>)]) -> Result<(f64, CaptionerGrads)> {
    let mut total = CaptionerGrads::zeros_like(model);
    let mut loss = 0.0;
    let k = 1.0 / data.len() as f64;
    for (f, r) in data {
        let (l, g) = nll_and_gradients(model, f, r)?;
        loss += l * k;
        total.add_scaled(&g, k);
    }
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("captioner loss became {loss}")));
    }
    Ok((loss, total))
}

#[derive(Debug, Clone)]
pub struct TrainedCaptioner {
    pub model: CaptionModel,
    pub config: CaptionerConfig,
    /// Mean NLL over the dataset before each full-batch step, then after the
    /// last one.
    pub loss_trace: Vec<f64>,
}

/// Full-batch descent on the mean teacher-forced NLL.
pub fn train_captioner(dataset: &[(Vec<f64>, String)], config: &CaptionerConfig) -> Result<TrainedCaptioner> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput("empty captioning dataset".into()));
    }
    let d_f = dataset[0].0.len();
    if d_f == 0 || dataset.iter().any(|(f, _)| f.len() != d_f) {
        return Err(Error::Shape("captioning features must share one non-zero length".into()));
    }
    let vocab = TokenVocabulary::build(dataset.iter().map(|(_, c)| c.as_str()));
    let data: Vec<(Vec<f64>, Vec<usize>)> = dataset.iter().map(|(f, c)| (f.clone(), vocab.encode(c))).collect();
    if let Some(i) = data.iter().position(|(_, r)| r.is_empty()) {
        return Err(Error::InvalidInput(format!("reference caption {i} has no words")));
    }
    let mut rng = seed::rng(config.seed);
    let mut model = CaptionModel::new(vocab, d_f, config.embed, config.hidden, &mut rng);
    let sizes: Vec<usize> = model.slices_mut().iter().map(|s| s.len()).collect();
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, &sizes);
    let mut loss_trace = Vec::with_capacity(config.epochs + 1);
    for _ in 0..config.epochs {
        let (loss, grads) = dataset_pass(&model, &data)?;
        loss_trace.push(loss);
        let gs = grads.slices();
        opt.step(model.slices_mut().into_iter().zip(gs).map(Some));
    }
    loss_trace.push(dataset_pass(&model, &data)?.0);
    Ok(TrainedCaptioner {
        model,
        config: config.clone(),
        loss_trace,
    })
}
