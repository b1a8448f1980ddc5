//! Caption-to-perception regression: tokenizer, sequence framing, a compact
//! contextual encoder and six token-averaged two-class heads.

pub mod external;
pub mod head;
pub mod model;
pub mod persist;
pub mod sequence;
pub mod tokenizer;
pub mod train;

use ndarray::Array1;

pub use external::{import_external_hidden, write_external_hidden, ExternalHidden, HiddenIndexEntry};
pub use head::{class_one_probability, rescale, score_sequence, token_probs, unscale, RegressionHead};
pub use model::{mean_rows, ContextualEncoder, EncoderGrads, HiddenMatrix};
pub use sequence::{build_sequence, SequenceLayout, MAX_SEQ_LENGTH};
pub use tokenizer::Tokenizer;
pub use train::{
    dataset_loss, examples_for, init_model, loss_and_gradients, train_heads, train_heads_on_hidden, Example,
    FreezeMask, Gradients, HeadTrainConfig, HiddenExample, ParamGroup, TargetRange, TrainOutcome,
};

use crate::corpus::{CaptionDocument, PerceptionDimension};
use crate::error::Result;
use crate::optim::Optimizer;

/// A trained (or freshly initialized) six-dimension perception model.
#[derive(Debug, Clone, PartialEq)]
pub struct PerceptionModel {
    pub tokenizer: Tokenizer,
    pub encoder: ContextualEncoder,
    /// One head per dimension, in [`PerceptionDimension::ALL`] order.
    pub heads: Vec<RegressionHead>,
    pub targets: [TargetRange; 6],
    pub config: HeadTrainConfig,
}

impl PerceptionModel {
    pub fn sequence(&self, doc: &CaptionDocument) -> SequenceLayout {
        build_sequence(doc, &self.tokenizer, self.config.max_seq_length)
    }

    pub fn hidden(&self, doc: &CaptionDocument) -> (SequenceLayout, HiddenMatrix) {
        let seq = self.sequence(doc);
        let h = self.encoder.encode(&seq);
        (seq, h)
    }

    /// Token-averaged scores in [0, 1], one per dimension.
    pub fn score01(&self, doc: &CaptionDocument) -> Result<[f64; 6]> {
        let (seq, hidden) = self.hidden(doc);
        let mut out = [0.0; 6];
        for (o, head) in out.iter_mut().zip(&self.heads) {
            *o = score_sequence(&token_probs(&hidden, head), &seq.content)?;
        }
        Ok(out)
    }

    /// Scores on the [0, 10] reporting scale.
    pub fn predict_doc(&self, doc: &CaptionDocument) -> Result<[f64; 6]> {
        Ok(self.score01(doc)?.map(rescale))
    }

    /// Scores mapped back onto the training Q-score range, for evaluation
    /// against held-out Q-scores.
    pub fn predict_q(&self, doc: &CaptionDocument) -> Result<[f64; 6]> {
        let s = self.score01(doc)?;
        Ok(std::array::from_fn(|d| self.targets[d].denormalize(s[d])))
    }

    /// Mean-pooled content rows: the sentence embedding of `doc`.
    pub fn sentence_embedding(&self, doc: &CaptionDocument) -> Result<Array1<f64>> {
        let (seq, hidden) = self.hidden(doc);
        mean_rows(&hidden, &seq.content)
            .ok_or_else(|| crate::Error::Degenerate(format!("{} has no content tokens", doc.image_id)))
    }

    pub fn is_finite(&self) -> bool {
        self.encoder.is_finite() && self.heads.iter().all(RegressionHead::is_finite)
    }

    /// Mutable parameter slices of one group. Head groups yield one slice per
    /// head in dimension order.
    pub fn group_slices_mut(&mut self, group: ParamGroup) -> Vec<&mut [f64]> {
        self.group_slices_mut_all()
            .into_iter()
            .filter(|(g, _, _)| *g == group)
            .map(|(_, _, s)| s)
            .collect()
    }

    /// Every parameter slice tagged with its group and head index (0 for
    /// encoder groups), in [`ParamGroup::ALL`] order.
    pub fn group_slices_mut_all(&mut self) -> Vec<(ParamGroup, usize, &mut [f64])> {
        let e = &mut self.encoder;
        let mut out: Vec<(ParamGroup, usize, &mut [f64])> = vec![
            (ParamGroup::TokenEmbedding, 0, e.token_embedding.as_slice_mut().unwrap()),
            (ParamGroup::PositionEmbedding, 0, e.position_embedding.as_slice_mut().unwrap()),
            (ParamGroup::AttentionQuery, 0, e.query.as_slice_mut().unwrap()),
            (ParamGroup::AttentionKey, 0, e.key.as_slice_mut().unwrap()),
            (ParamGroup::AttentionValue, 0, e.value.as_slice_mut().unwrap()),
            (ParamGroup::AttentionOutput, 0, e.output.as_slice_mut().unwrap()),
        ];
        let mut biases = Vec::new();
        for (i, h) in self.heads.iter_mut().enumerate() {
            out.push((ParamGroup::HeadWeights, i, h.weights.as_slice_mut().unwrap()));
            biases.push((ParamGroup::HeadBias, i, h.bias.as_slice_mut().unwrap()));
        }
        out.extend(biases);
        out
    }

    pub(crate) fn apply_update(
        &mut self,
        opt: &mut Optimizer,
        grads: &Gradients,
        freeze: &FreezeMask,
        dims: &[PerceptionDimension],
    ) {
        let grad_slices: Vec<Vec<&[f64]>> = ParamGroup::ALL.iter().map(|&g| grads.group(g)).collect();
        let slots = self.group_slices_mut_all().into_iter().map(|(g, i, p)| {
            let is_head = matches!(g, ParamGroup::HeadWeights | ParamGroup::HeadBias);
            let active = !is_head || dims.iter().any(|d| d.index() == i);
            let g_slice = grad_slices[g as usize].get(i)?;
            (active && !freeze.is_frozen(g)).then_some((p, *g_slice))
        });
        opt.step(slots);
    }
}

/// Six [0, 10] scores per document.
pub fn predict(model: &PerceptionModel, docs: &[CaptionDocument]) -> Result<Vec<[f64; 6]>> {
    docs.iter().map(|d| model.predict_doc(d)).collect()
}
