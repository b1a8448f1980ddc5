use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::head::{class_one_probability, RegressionHead};
use super::model::{ContextualEncoder, EncoderGrads, HiddenMatrix};
use super::sequence::{build_sequence, SequenceLayout, MAX_SEQ_LENGTH};
use super::tokenizer::Tokenizer;
use super::PerceptionModel;
use crate::corpus::{LabeledEntry, PerceptionDimension};
use crate::error::{Error, Result};
use crate::optim::{Optimizer, OptimizerKind};
use crate::seed;

/// Trainable parameter groups. Each group is either frozen or updated as a
/// whole; the head groups span all six heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    TokenEmbedding,
    PositionEmbedding,
    AttentionQuery,
    AttentionKey,
    AttentionValue,
    AttentionOutput,
    HeadWeights,
    HeadBias,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 8] = [
        ParamGroup::TokenEmbedding,
        ParamGroup::PositionEmbedding,
        ParamGroup::AttentionQuery,
        ParamGroup::AttentionKey,
        ParamGroup::AttentionValue,
        ParamGroup::AttentionOutput,
        ParamGroup::HeadWeights,
        ParamGroup::HeadBias,
    ];

    fn is_encoder(self) -> bool {
        !matches!(self, ParamGroup::HeadWeights | ParamGroup::HeadBias)
    }
}

/// Frozen flag for every parameter group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "BTreeMap<ParamGroup, bool>", try_from = "BTreeMap<ParamGroup, bool>")]
pub struct FreezeMask {
    frozen: [bool; 8],
}

impl FreezeMask {
    pub fn none() -> Self {
        FreezeMask { frozen: [false; 8] }
    }

    pub fn all() -> Self {
        FreezeMask { frozen: [true; 8] }
    }

    pub fn with(mut self, group: ParamGroup, frozen: bool) -> Self {
        self.frozen[group as usize] = frozen;
        self
    }

    pub fn is_frozen(&self, group: ParamGroup) -> bool {
        self.frozen[group as usize]
    }

    fn any_encoder_trainable(&self) -> bool {
        ParamGroup::ALL.iter().any(|&g| g.is_encoder() && !self.is_frozen(g))
    }

    fn embeddings_trainable(&self) -> bool {
        !self.is_frozen(ParamGroup::TokenEmbedding) || !self.is_frozen(ParamGroup::PositionEmbedding)
    }
}

/// Embedding and position tables frozen, everything else trainable.
impl Default for FreezeMask {
    fn default() -> Self {
        FreezeMask::none()
            .with(ParamGroup::TokenEmbedding, true)
            .with(ParamGroup::PositionEmbedding, true)
    }
}

impl From<FreezeMask> for BTreeMap<ParamGroup, bool> {
    fn from(m: FreezeMask) -> Self {
        ParamGroup::ALL.iter().map(|&g| (g, m.is_frozen(g))).collect()
    }
}

impl TryFrom<BTreeMap<ParamGroup, bool>> for FreezeMask {
    type Error = String;

    fn try_from(map: BTreeMap<ParamGroup, bool>) -> std::result::Result<Self, String> {
        let mut mask = FreezeMask::none();
        for g in ParamGroup::ALL {
            let f = map.get(&g).ok_or_else(|| format!("freeze mask lacks group {g:?}"))?;
            mask = mask.with(g, *f);
        }
        Ok(mask)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeadTrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub hidden: usize,
    pub max_seq_length: usize,
    pub min_freq: usize,
    pub lowercase: bool,
    pub optimizer: OptimizerKind,
    pub freeze: FreezeMask,
    /// Dimensions whose heads receive a loss. The others keep their
    /// initialization.
    pub dimensions: Vec<PerceptionDimension>,
}

impl Default for HeadTrainConfig {
    fn default() -> Self {
        HeadTrainConfig {
            batch_size: 32,
            learning_rate: 2e-5,
            epochs: 20,
            seed: 0,
            hidden: 64,
            max_seq_length: MAX_SEQ_LENGTH,
            min_freq: 1,
            lowercase: true,
            optimizer: OptimizerKind::Adam,
            freeze: FreezeMask::default(),
            dimensions: PerceptionDimension::ALL.to_vec(),
        }
    }
}

/// Training-split min/max of one dimension's Q-scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetRange {
    pub min: f64,
    pub max: f64,
}

impl TargetRange {
    pub fn normalize(&self, q: f64) -> f64 {
        (q - self.min) / (self.max - self.min)
    }

    pub fn denormalize(&self, score01: f64) -> f64 {
        self.min + score01 * (self.max - self.min)
    }

    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let (min, max) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        (max > min && min.is_finite() && max.is_finite()).then_some(TargetRange { min, max })
    }
}

/// One training sequence with its normalized targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub sequence: SequenceLayout,
    pub targets: [f64; 6],
}

#[derive(Debug, Clone)]
pub struct HeadGrads {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub encoder: Option<EncoderGrads>,
    pub heads: Vec<HeadGrads>,
}

impl Gradients {
    /// Gradient slices for `group`, in the same order as
    /// [`PerceptionModel::group_slices_mut`]. Encoder groups come back empty
    /// when the encoder was not differentiated.
    pub fn group(&self, group: ParamGroup) -> Vec<&[f64]> {
        let enc = |f: fn(&EncoderGrads) -> &Array2<f64>| {
            self.encoder
                .as_ref()
                .map(|e| vec![f(e).as_slice().unwrap()])
                .unwrap_or_default()
        };
        match group {
            ParamGroup::TokenEmbedding => enc(|e| &e.token_embedding),
            ParamGroup::PositionEmbedding => enc(|e| &e.position_embedding),
            ParamGroup::AttentionQuery => enc(|e| &e.query),
            ParamGroup::AttentionKey => enc(|e| &e.key),
            ParamGroup::AttentionValue => enc(|e| &e.value),
            ParamGroup::AttentionOutput => enc(|e| &e.output),
            ParamGroup::HeadWeights => self.heads.iter().map(|h| h.weights.as_slice().unwrap()).collect(),
            ParamGroup::HeadBias => self.heads.iter().map(|h| h.bias.as_slice().unwrap()).collect(),
        }
    }
}

/// Squared-error contribution of one hidden matrix across `dims`, plus
/// head gradients (scaled by `coeff`) and dLoss/dHidden.
fn head_pass(
    hidden: &HiddenMatrix,
    content: &[bool],
    heads: &[RegressionHead],
    targets: &[f64; 6],
    dims: &[PerceptionDimension],
    coeff: f64,
    head_grads: &mut [HeadGrads],
) -> Result<(f64, Array2<f64>)> {
    let n = hidden.nrows();
    let m = content.iter().filter(|&&c| c).count();
    if m == 0 {
        return Err(Error::Degenerate("training sequence has no content tokens".into()));
    }
    let mut d_hidden = Array2::zeros(hidden.raw_dim());
    let mut sq = 0.0;
    for &dim in dims {
        let head = &heads[dim.index()];
        let logits = hidden.dot(&head.weights) + &head.bias;
        let probs: Vec<f64> = logits
            .rows()
            .into_iter()
            .map(|z| class_one_probability(z[0], z[1]))
            .collect();
        let score = probs.iter().zip(content).filter(|(_, &c)| c).map(|(p, _)| p).sum::<f64>() / m as f64;
        let r = score - targets[dim.index()];
        sq += r * r;
        let g = 2.0 * r * coeff / m as f64;
        let mut dz = Array2::zeros((n, 2));
        for j in 0..n {
            if content[j] {
                let d = g * probs[j] * (1.0 - probs[j]);
                dz[[j, 0]] = -d;
                dz[[j, 1]] = d;
            }
        }
        let hg = &mut head_grads[dim.index()];
        hg.weights += &hidden.t().dot(&dz);
        hg.bias += &dz.sum_axis(ndarray::Axis(0));
        d_hidden += &dz.dot(&head.weights.t());
    }
    Ok((sq, d_hidden))
}

fn zero_head_grads(heads: &[RegressionHead]) -> Vec<HeadGrads> {
    heads
        .iter()
        .map(|h| HeadGrads {
            weights: Array2::zeros(h.weights.raw_dim()),
            bias: Array1::zeros(h.bias.len()),
        })
        .collect()
}

/// Mean squared error between token-averaged scores and targets over
/// `batch × dims`, with analytic gradients for every group `freeze` leaves
/// trainable (head gradients are always produced).
pub fn loss_and_gradients(
    encoder: &ContextualEncoder,
    heads: &[RegressionHead],
    batch: &[Example],
    dims: &[PerceptionDimension],
    freeze: &FreezeMask,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() || dims.is_empty() {
        return Err(Error::InvalidInput("empty batch or dimension list".into()));
    }
    let coeff = 1.0 / (batch.len() * dims.len()) as f64;
    let mut head_grads = zero_head_grads(heads);
    let mut enc_grads = freeze
        .any_encoder_trainable()
        .then(|| EncoderGrads::zeros_like(encoder, freeze.embeddings_trainable()));
    let mut total = 0.0;
    for ex in batch {
        let len = ex.sequence.len;
        let cache = encoder.forward(&ex.sequence.ids[..len], len);
        let (sq, d_hidden) = head_pass(
            &cache.hidden,
            &ex.sequence.content[..len],
            heads,
            &ex.targets,
            dims,
            coeff,
            &mut head_grads,
        )?;
        total += sq;
        if let Some(g) = enc_grads.as_mut() {
            encoder.backward(&cache, d_hidden.view(), g);
        }
    }
    Ok((
        total * coeff,
        Gradients {
            encoder: enc_grads,
            heads: head_grads,
        },
    ))
}

/// Loss only, evaluated in chunks so memory stays flat.
pub fn dataset_loss(
    encoder: &ContextualEncoder,
    heads: &[RegressionHead],
    examples: &[Example],
    dims: &[PerceptionDimension],
) -> Result<f64> {
    let mut total = 0.0;
    let mut scratch = zero_head_grads(heads);
    for ex in examples {
        let len = ex.sequence.len;
        let hidden = encoder.forward(&ex.sequence.ids[..len], len).hidden;
        let (sq, _) = head_pass(&hidden, &ex.sequence.content[..len], heads, &ex.targets, dims, 0.0, &mut scratch)?;
        total += sq;
    }
    Ok(total / (examples.len() * dims.len()) as f64)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: PerceptionModel,
    /// Full training-set loss before the first epoch, then after each epoch.
    pub loss_trace: Vec<f64>,
}

pub fn target_ranges(train: &[LabeledEntry], dims: &[PerceptionDimension]) -> Result<[TargetRange; 6]> {
    let mut ranges = [TargetRange { min: 0.0, max: 10.0 }; 6];
    for dim in PerceptionDimension::ALL {
        match TargetRange::from_values(train.iter().map(|e| e.scores[dim.index()])) {
            Some(r) => ranges[dim.index()] = r,
            None if dims.contains(&dim) => {
                return Err(Error::Degenerate(format!(
                    "training targets for {dim} have no spread; cannot normalize"
                )))
            }
            None => {}
        }
    }
    Ok(ranges)
}

/// Initialize a model for `train`: vocabulary, target ranges and seeded
/// weights. No optimization happens here.
pub fn init_model(train: &[LabeledEntry], config: &HeadTrainConfig) -> Result<PerceptionModel> {
    if train.is_empty() {
        return Err(Error::InvalidInput("training split is empty".into()));
    }
    if config.batch_size == 0 || config.hidden == 0 || config.max_seq_length < 2 {
        return Err(Error::InvalidInput("batch size, hidden size and max length must be positive".into()));
    }
    let targets = target_ranges(train, &config.dimensions)?;
    let tokenizer = Tokenizer::fit(
        train.iter().flat_map(|e| e.doc.captions.iter().map(String::as_str)),
        config.min_freq,
        config.lowercase,
    );
    let mut rng = seed::rng(config.seed);
    let encoder = ContextualEncoder::new(tokenizer.vocab_size(), config.hidden, config.max_seq_length, &mut rng);
    let heads = (0..6).map(|_| RegressionHead::zeros(config.hidden)).collect();
    Ok(PerceptionModel {
        tokenizer,
        encoder,
        heads,
        targets,
        config: config.clone(),
    })
}

pub fn examples_for(model: &PerceptionModel, entries: &[LabeledEntry]) -> Vec<Example> {
    entries
        .iter()
        .map(|e| {
            let mut targets = [0.0; 6];
            for d in PerceptionDimension::ALL {
                targets[d.index()] = model.targets[d.index()].normalize(e.scores[d.index()]);
            }
            Example {
                sequence: build_sequence(&e.doc, &model.tokenizer, model.config.max_seq_length),
                targets,
            }
        })
        .collect()
}

/// Fine-tune the six heads (and any unfrozen encoder groups) on `train`.
pub fn train_heads(train: &[LabeledEntry], config: &HeadTrainConfig) -> Result<TrainOutcome> {
    let mut model = init_model(train, config)?;
    let examples = examples_for(&model, train);
    let dims = config.dimensions.clone();
    if dims.is_empty() {
        return Err(Error::InvalidInput("no dimensions selected for training".into()));
    }
    let mut shuffle_rng = seed::rng(seed::sub_seed(config.seed, seed::Stream::Split));
    let mut loss_trace = vec![dataset_loss(&model.encoder, &model.heads, &examples, &dims)?];
    let sizes: Vec<usize> = model.group_slices_mut_all().iter().map(|(_, _, s)| s.len()).collect();
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, &sizes);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Example> = chunk.iter().map(|&i| examples[i].clone()).collect();
            let (loss, grads) = loss_and_gradients(&model.encoder, &model.heads, &batch, &dims, &config.freeze)?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("non-finite loss {loss} in epoch {epoch}")));
            }
            model.apply_update(&mut opt, &grads, &config.freeze, &dims);
        }
        let loss = dataset_loss(&model.encoder, &model.heads, &examples, &dims)?;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("non-finite loss {loss} after epoch {epoch}")));
        }
        loss_trace.push(loss);
    }
    Ok(TrainOutcome { model, loss_trace })
}

/// A precomputed hidden matrix with its content mask and normalized targets.
#[derive(Debug, Clone)]
pub struct HiddenExample {
    pub hidden: HiddenMatrix,
    pub content: Vec<bool>,
    pub targets: [f64; 6],
}

/// Train heads only, on hidden states produced elsewhere (for instance by
/// a large pretrained encoder). Returns the heads and a loss trace.
pub fn train_heads_on_hidden(
    examples: &[HiddenExample],
    config: &HeadTrainConfig,
) -> Result<(Vec<RegressionHead>, Vec<f64>)> {
    let hidden = examples
        .first()
        .ok_or_else(|| Error::InvalidInput("no hidden examples".into()))?
        .hidden
        .ncols();
    if examples.iter().any(|e| e.hidden.ncols() != hidden || e.hidden.nrows() != e.content.len()) {
        return Err(Error::Shape("hidden examples disagree on width or mask length".into()));
    }
    let dims = &config.dimensions;
    let mut heads: Vec<RegressionHead> = (0..6).map(|_| RegressionHead::zeros(hidden)).collect();
    let mut shuffle_rng = seed::rng(seed::sub_seed(config.seed, seed::Stream::Split));
    let sizes: Vec<usize> = heads.iter().flat_map(|h| [h.weights.len(), h.bias.len()]).collect();
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, &sizes);
    let loss_of = |heads: &[RegressionHead]| -> Result<f64> {
        let mut scratch = zero_head_grads(heads);
        let mut total = 0.0;
        for e in examples {
            total += head_pass(&e.hidden, &e.content, heads, &e.targets, dims, 0.0, &mut scratch)?.0;
        }
        Ok(total / (examples.len() * dims.len()) as f64)
    };
    let mut trace = vec![loss_of(&heads)?];
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(config.batch_size.max(1)) {
            let coeff = 1.0 / (chunk.len() * dims.len()) as f64;
            let mut grads = zero_head_grads(&heads);
            for &i in chunk {
                let e = &examples[i];
                head_pass(&e.hidden, &e.content, &heads, &e.targets, dims, coeff, &mut grads)?;
            }
            let frozen_w = config.freeze.is_frozen(ParamGroup::HeadWeights);
            let frozen_b = config.freeze.is_frozen(ParamGroup::HeadBias);
            let slots = heads.iter_mut().zip(&grads).enumerate().flat_map(|(d, (h, g))| {
                let active = dims.iter().any(|x| x.index() == d);
                [
                    (active && !frozen_w).then(|| (h.weights.as_slice_mut().unwrap(), g.weights.as_slice().unwrap())),
                    (active && !frozen_b).then(|| (h.bias.as_slice_mut().unwrap(), g.bias.as_slice().unwrap())),
                ]
            });
            opt.step(slots);
        }
        let loss = loss_of(&heads)?;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("non-finite loss {loss}")));
        }
        trace.push(loss);
    }
    Ok((heads, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CaptionDocument;
    use rand::Rng as _;

    fn entry(id: &str, text: &str, score: f64) -> LabeledEntry {
        LabeledEntry {
            doc: CaptionDocument::new(id, vec![text.to_string(); 5]).unwrap(),
            scores: [score, 10.0 - score, score / 2.0, score, 1.0 + score / 3.0, score],
        }
    }

    fn tiny() -> Vec<LabeledEntry> {
        vec![
            entry("a", "trees near the park", 8.0),
            entry("b", "trash near the road", 2.0),
            entry("c", "a road near trees", 5.5),
            entry("d", "graffiti on a wall", 1.0),
        ]
    }

    fn small_config() -> HeadTrainConfig {
        HeadTrainConfig {
            hidden: 8,
            max_seq_length: 32,
            batch_size: 2,
            ..Default::default()
        }
    }

    fn perturbed_model(seed: u64) -> PerceptionModel {
        let mut model = init_model(&tiny(), &small_config()).unwrap();
        let mut rng = crate::seed::rng(seed);
        for h in &mut model.heads {
            h.weights.mapv_inplace(|_| rng.random_range(-0.3..0.3));
            h.bias.mapv_inplace(|_| rng.random_range(-0.3..0.3));
        }
        model
    }

    #[test]
    fn finite_difference_gradients() {
        let model = perturbed_model(5);
        let batch = examples_for(&model, &tiny()[..3]);
        let dims = PerceptionDimension::ALL.to_vec();
        let freeze = FreezeMask::none();
        let (_, grads) = loss_and_gradients(&model.encoder, &model.heads, &batch, &dims, &freeze).unwrap();
        let eps = 1e-5;
        for group in ParamGroup::ALL {
            let analytic: Vec<f64> = grads.group(group).concat();
            let n = analytic.len();
            let mut numeric = Vec::with_capacity(n);
            for k in 0..n {
                let eval = |delta: f64| {
                    let mut m = model.clone();
                    let mut slices = m.group_slices_mut(group);
                    let mut idx = k;
                    for s in slices.iter_mut() {
                        if idx < s.len() {
                            s[idx] += delta;
                            break;
                        }
                        idx -= s.len();
                    }
                    loss_and_gradients(&m.encoder, &m.heads, &batch, &dims, &freeze).unwrap().0
                };
                numeric.push((eval(eps) - eval(-eps)) / (2.0 * eps));
            }
            let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(numeric.iter().map(|a| a * a).sum::<f64>().sqrt());
            assert!(scale > 0.0, "{group:?} has an all-zero gradient");
            assert!(diff / scale < 1e-6, "{group:?}: relative error {}", diff / scale);
        }
    }

    #[test]
    fn freeze_all_zero_epochs_is_initialization() {
        let cfg = HeadTrainConfig { epochs: 0, freeze: FreezeMask::all(), ..small_config() };
        let out = train_heads(&tiny(), &cfg).unwrap();
        assert_eq!(out.model, init_model(&tiny(), &cfg).unwrap());
        assert_eq!(out.loss_trace.len(), 1);
    }

    #[test]
    fn frozen_groups_are_bit_identical() {
        let cfg = HeadTrainConfig { epochs: 3, learning_rate: 1e-2, ..small_config() };
        let init = init_model(&tiny(), &cfg).unwrap();
        let out = train_heads(&tiny(), &cfg).unwrap().model;
        assert_eq!(out.encoder.token_embedding, init.encoder.token_embedding);
        assert_eq!(out.encoder.position_embedding, init.encoder.position_embedding);
        assert_ne!(out.encoder.key, init.encoder.key);
        assert_ne!(out.heads, init.heads);
    }

    #[test]
    fn inactive_dimensions_keep_their_heads() {
        let cfg = HeadTrainConfig {
            epochs: 2,
            learning_rate: 1e-2,
            dimensions: vec![PerceptionDimension::Safe],
            ..small_config()
        };
        let out = train_heads(&tiny(), &cfg).unwrap().model;
        let zero = RegressionHead::zeros(8);
        for d in PerceptionDimension::ALL {
            assert_eq!(out.heads[d.index()] == zero, d != PerceptionDimension::Safe, "{d}");
        }
    }

    #[test]
    fn loss_decreases_on_tiny_corpus() {
        let cfg = HeadTrainConfig { epochs: 5, learning_rate: 1e-2, ..small_config() };
        let trace = train_heads(&tiny(), &cfg).unwrap().loss_trace;
        assert_eq!(trace.len(), 6);
        assert!(trace.windows(2).all(|w| w[1] < w[0]), "{trace:?}");
    }

    #[test]
    fn degenerate_target_range_is_rejected() {
        let flat: Vec<LabeledEntry> = tiny()
            .into_iter()
            .map(|mut e| {
                e.scores[0] = 4.0;
                e
            })
            .collect();
        assert!(matches!(train_heads(&flat, &small_config()), Err(Error::Degenerate(_))));
        let cfg = HeadTrainConfig { dimensions: vec![PerceptionDimension::Safe], epochs: 1, ..small_config() };
        assert!(train_heads(&flat, &cfg).is_ok());
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = HeadTrainConfig { epochs: 2, learning_rate: 1e-3, ..small_config() };
        let a = train_heads(&tiny(), &cfg).unwrap();
        let b = train_heads(&tiny(), &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.loss_trace, b.loss_trace);
    }

    #[test]
    fn freeze_mask_json_lists_every_group() {
        let json = serde_json::to_value(FreezeMask::default()).unwrap();
        let obj = json.as_object().unwrap();
        assert_eq!(obj.len(), 8);
        assert_eq!(obj["token_embedding"], true);
        assert_eq!(obj["attention_key"], false);
        let partial = r#"{"token_embedding": true}"#;
        assert!(serde_json::from_str::<FreezeMask>(partial).is_err());
    }

    #[test]
    fn heads_on_external_hidden_states() {
        let mut rng = crate::seed::rng(9);
        let examples: Vec<HiddenExample> = (0..40)
            .map(|_| {
                let t: f64 = rng.random();
                let hidden = Array2::from_shape_fn((6, 4), |(_, j)| if j == 0 { 4.0 * (t - 0.5) } else { rng.random_range(-0.1..0.1) });
                HiddenExample { hidden, content: vec![true; 6], targets: [t; 6] }
            })
            .collect();
        let cfg = HeadTrainConfig { epochs: 30, learning_rate: 0.05, batch_size: 8, ..Default::default() };
        let (_, trace) = train_heads_on_hidden(&examples, &cfg).unwrap();
        assert!(trace.last().unwrap() < &(trace[0] * 0.2), "{trace:?}");
    }
}
