use ndarray::{s, Array1, Array2, ArrayView2};
use rand_distr::{Distribution, Normal, Uniform};

use super::sequence::SequenceLayout;
use crate::seed::Rng;

/// Hidden states, one row per sequence position.
pub type HiddenMatrix = Array2<f64>;

/// Token + position embeddings followed by one single-head scaled
/// dot-product attention layer with a residual connection:
///
/// ```text
/// X = E[ids] + P[0..n]
/// A = softmax(X Wq (X Wk)^T / sqrt(h))     (keys restricted to non-pad positions)
/// H = X + A (X Wv) Wo
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ContextualEncoder {
    pub token_embedding: Array2<f64>,
    pub position_embedding: Array2<f64>,
    pub query: Array2<f64>,
    pub key: Array2<f64>,
    pub value: Array2<f64>,
    pub output: Array2<f64>,
}

/// Token-table standard deviation, in units of `sqrt(h)`.
const TOKEN_STD: f64 = 2.0;
/// Position-table standard deviation, in units of `sqrt(h)`.
const POSITION_STD: f64 = 0.1;

impl ContextualEncoder {
    /// Token embeddings ~ N(0, 4h), positions ~ N(0, 0.01h).
    /// Value and output matrices are Glorot-uniform; query and key are
    /// Glorot-uniform divided by `sqrt(h)`, which keeps the initial attention
    /// logits at unit scale.
    pub fn new(vocab_size: usize, hidden: usize, max_len: usize, rng: &mut Rng) -> Self {
        assert!(hidden > 0 && vocab_size > 0 && max_len > 0);
        let sd = (hidden as f64).sqrt();
        let tok = Normal::new(0.0, TOKEN_STD * sd).unwrap();
        let pos = Normal::new(0.0, POSITION_STD * sd).unwrap();
        let limit = (6.0 / (2.0 * hidden as f64)).sqrt();
        let glorot = Uniform::new_inclusive(-limit, limit).unwrap();
        let qk = Uniform::new_inclusive(-limit / sd, limit / sd).unwrap();
        let mut draw = |rows, cols, d: &dyn Fn(&mut Rng) -> f64| {
            Array2::from_shape_simple_fn((rows, cols), || d(rng))
        };
        let token_embedding = draw(vocab_size, hidden, &|r| tok.sample(r));
        let position_embedding = draw(max_len, hidden, &|r| pos.sample(r));
        let query = draw(hidden, hidden, &|r| qk.sample(r));
        let key = draw(hidden, hidden, &|r| qk.sample(r));
        let value = draw(hidden, hidden, &|r| glorot.sample(r));
        let output = draw(hidden, hidden, &|r| glorot.sample(r));
        ContextualEncoder {
            token_embedding,
            position_embedding,
            query,
            key,
            value,
            output,
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.token_embedding.ncols()
    }

    pub fn vocab_size(&self) -> usize {
        self.token_embedding.nrows()
    }

    pub fn max_len(&self) -> usize {
        self.position_embedding.nrows()
    }

    /// Hidden matrix for every position of the padded layout. Padding never
    /// acts as a key, so content rows do not depend on how much padding
    /// follows them.
    pub fn encode(&self, seq: &SequenceLayout) -> HiddenMatrix {
        self.forward(&seq.ids, seq.len).hidden
    }

    pub(crate) fn forward(&self, ids: &[usize], key_len: usize) -> ForwardCache {
        let n = ids.len();
        let h = self.hidden_size();
        assert!(n <= self.max_len(), "sequence longer than position table");
        assert!(key_len >= 1 && key_len <= n);
        let mut x = Array2::zeros((n, h));
        for (i, &id) in ids.iter().enumerate() {
            let mut row = x.row_mut(i);
            row.assign(&self.token_embedding.row(id));
            row += &self.position_embedding.row(i);
        }
        let q = x.dot(&self.query);
        let xk = x.slice(s![..key_len, ..]);
        let k = xk.dot(&self.key);
        let v = xk.dot(&self.value);
        let scale = 1.0 / (h as f64).sqrt();
        let mut attn = q.dot(&k.t()) * scale;
        for mut row in attn.rows_mut() {
            softmax_in_place(row.as_slice_mut().unwrap());
        }
        let context = attn.dot(&v);
        let hidden = &x + &context.dot(&self.output);
        ForwardCache {
            ids: ids.to_vec(),
            x,
            q,
            k,
            v,
            attn,
            context,
            hidden,
        }
    }

    /// Accumulate parameter gradients given dLoss/dHidden.
    pub(crate) fn backward(&self, cache: &ForwardCache, d_hidden: ArrayView2<f64>, grads: &mut EncoderGrads) {
        let h = self.hidden_size();
        let key_len = cache.k.nrows();
        let scale = 1.0 / (h as f64).sqrt();

        grads.output += &cache.context.t().dot(&d_hidden);
        let d_context = d_hidden.dot(&self.output.t());
        let d_attn = d_context.dot(&cache.v.t());
        let d_value = cache.attn.t().dot(&d_context);

        // softmax backward, row by row
        let mut d_scores = Array2::zeros(cache.attn.raw_dim());
        for ((a, da), mut ds) in cache
            .attn
            .rows()
            .into_iter()
            .zip(d_attn.rows())
            .zip(d_scores.rows_mut())
        {
            let dot: f64 = a.iter().zip(da.iter()).map(|(x, y)| x * y).sum();
            for j in 0..a.len() {
                ds[j] = a[j] * (da[j] - dot);
            }
        }
        d_scores *= scale;
        let d_query = d_scores.dot(&cache.k);
        let d_key = d_scores.t().dot(&cache.q);

        let xk = cache.x.slice(s![..key_len, ..]);
        grads.query += &cache.x.t().dot(&d_query);
        grads.key += &xk.t().dot(&d_key);
        grads.value += &xk.t().dot(&d_value);

        if !grads.track_embeddings {
            return;
        }
        let mut d_x = d_hidden.to_owned();
        d_x += &d_query.dot(&self.query.t());
        let mut head = d_x.slice_mut(s![..key_len, ..]);
        head += &d_key.dot(&self.key.t());
        head += &d_value.dot(&self.value.t());
        for (i, &id) in cache.ids.iter().enumerate() {
            let row = d_x.row(i);
            let mut e = grads.token_embedding.row_mut(id);
            e += &row;
            let mut p = grads.position_embedding.row_mut(i);
            p += &row;
        }
    }

    /// Zero every attention matrix, leaving `H = E[ids] + P`.
    pub fn zero_attention(&mut self) {
        for m in [&mut self.query, &mut self.key, &mut self.value, &mut self.output] {
            m.fill(0.0);
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            &self.token_embedding,
            &self.position_embedding,
            &self.query,
            &self.key,
            &self.value,
            &self.output,
        ]
        .iter()
        .all(|m| m.iter().all(|v| v.is_finite()))
    }
}

pub(crate) struct ForwardCache {
    ids: Vec<usize>,
    x: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    attn: Array2<f64>,
    context: Array2<f64>,
    pub hidden: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct EncoderGrads {
    pub track_embeddings: bool,
    pub token_embedding: Array2<f64>,
    pub position_embedding: Array2<f64>,
    pub query: Array2<f64>,
    pub key: Array2<f64>,
    pub value: Array2<f64>,
    pub output: Array2<f64>,
}

impl EncoderGrads {
    pub fn zeros_like(enc: &ContextualEncoder, track_embeddings: bool) -> Self {
        let z = |m: &Array2<f64>| Array2::zeros(m.raw_dim());
        EncoderGrads {
            track_embeddings,
            token_embedding: z(&enc.token_embedding),
            position_embedding: z(&enc.position_embedding),
            query: z(&enc.query),
            key: z(&enc.key),
            value: z(&enc.value),
            output: z(&enc.output),
        }
    }
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Mean of the hidden rows at content positions.
pub fn mean_rows(hidden: &HiddenMatrix, mask: &[bool]) -> Option<Array1<f64>> {
    let rows: Vec<usize> = mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
    if rows.is_empty() {
        return None;
    }
    let mut acc = Array1::zeros(hidden.ncols());
    for &i in &rows {
        acc += &hidden.row(i);
    }
    Some(acc / rows.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn toy(v: usize, h: usize, l: usize, s: u64) -> ContextualEncoder {
        ContextualEncoder::new(v, h, l, &mut seed::rng(s))
    }

    #[test]
    fn zero_attention_is_residual_identity() {
        let mut enc = toy(10, 6, 12, 1);
        enc.zero_attention();
        let seq = SequenceLayout::from_segments(&[vec![4, 5], vec![6], vec![7], vec![8], vec![9]], 12);
        let hidden = enc.encode(&seq);
        for (i, &id) in seq.ids.iter().enumerate() {
            let expected = &enc.token_embedding.row(id) + &enc.position_embedding.row(i);
            assert_eq!(hidden.row(i), expected);
        }
    }

    #[test]
    fn swapping_tokens_swaps_rows_without_positions() {
        let mut enc = toy(12, 8, 16, 2);
        enc.position_embedding.fill(0.0);
        let a = SequenceLayout::from_segments(&[vec![4, 5, 6], vec![7], vec![8], vec![9], vec![10]], 16);
        let mut b = a.clone();
        b.ids.swap(1, 3);
        let (ha, hb) = (enc.encode(&a), enc.encode(&b));
        for j in 0..8 {
            assert!((ha[[1, j]] - hb[[3, j]]).abs() < 1e-12);
            assert!((ha[[3, j]] - hb[[1, j]]).abs() < 1e-12);
            assert!((ha[[2, j]] - hb[[2, j]]).abs() < 1e-12);
        }
    }

    #[test]
    fn padding_does_not_leak_into_content_rows() {
        let enc = toy(12, 8, 32, 3);
        let segs = [vec![4, 5], vec![6], vec![7], vec![8], vec![9]];
        let short = SequenceLayout::from_segments(&segs, 12);
        let long = SequenceLayout::from_segments(&segs, 32);
        let (hs, hl) = (enc.encode(&short), enc.encode(&long));
        for i in 0..short.len {
            for j in 0..8 {
                assert!((hs[[i, j]] - hl[[i, j]]).abs() < 1e-12);
            }
        }
        assert_eq!(hl.nrows(), 32);
    }

    // Hand-unrolled attention on a four-token sequence, written with plain
    // loops and no shared helpers.
    #[test]
    fn matches_loop_oracle() {
        let enc = toy(8, 3, 4, 4);
        let ids = [2usize, 5, 6, 3];
        let seq = SequenceLayout { ids: ids.to_vec(), content: vec![false, true, true, false], len: 4 };
        let hidden = enc.encode(&seq);
        let h = 3;
        let mut x = [[0.0f64; 3]; 4];
        for i in 0..4 {
            for d in 0..h {
                x[i][d] = enc.token_embedding[[ids[i], d]] + enc.position_embedding[[i, d]];
            }
        }
        let proj = |m: &Array2<f64>, row: &[f64; 3]| {
            let mut out = [0.0; 3];
            for c in 0..h {
                for r in 0..h {
                    out[c] += row[r] * m[[r, c]];
                }
            }
            out
        };
        for i in 0..4 {
            let q = proj(&enc.query, &x[i]);
            let mut w = [0.0; 4];
            for j in 0..4 {
                let k = proj(&enc.key, &x[j]);
                w[j] = (q[0] * k[0] + q[1] * k[1] + q[2] * k[2]) / 3f64.sqrt();
            }
            let m = w.iter().cloned().fold(f64::MIN, f64::max);
            let z: f64 = w.iter().map(|s| (s - m).exp()).sum();
            let mut ctx = [0.0; 3];
            for j in 0..4 {
                let a = (w[j] - m).exp() / z;
                let v = proj(&enc.value, &x[j]);
                for d in 0..h {
                    ctx[d] += a * v[d];
                }
            }
            let o = proj(&enc.output, &ctx);
            for d in 0..h {
                assert!((hidden[[i, d]] - (x[i][d] + o[d])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mean_rows_of_content() {
        let m = Array2::from_shape_vec((3, 2), vec![1.0, 2.0, 3.0, 4.0, 100.0, 100.0]).unwrap();
        assert_eq!(mean_rows(&m, &[true, true, false]).unwrap().to_vec(), vec![2.0, 3.0]);
        assert!(mean_rows(&m, &[false, false, false]).is_none());
    }
}
