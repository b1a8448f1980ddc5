use ndarray::{Array1, Array2};

use super::model::HiddenMatrix;
use crate::error::{Error, Result};

/// Two-class token scorer: `Pr(l = 1 | token j) = softmax(H_j W + b)[1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionHead {
    /// `h × 2`
    pub weights: Array2<f64>,
    /// length 2
    pub bias: Array1<f64>,
}

impl RegressionHead {
    /// Every token starts at probability 0.5.
    pub fn zeros(hidden: usize) -> Self {
        RegressionHead {
            weights: Array2::zeros((hidden, 2)),
            bias: Array1::zeros(2),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

/// Class-1 probability of the two-way softmax `[z0, z1]`.
#[inline]
pub fn class_one_probability(z0: f64, z1: f64) -> f64 {
    let d = z0 - z1;
    if d >= 0.0 {
        let e = (-d).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + d.exp())
    }
}

/// Per-row class-1 probability of `softmax(H W + b)`.
pub fn token_probs(hidden: &HiddenMatrix, head: &RegressionHead) -> Vec<f64> {
    assert_eq!(hidden.ncols(), head.hidden_size(), "hidden width does not match head");
    let logits = hidden.dot(&head.weights) + &head.bias;
    logits
        .rows()
        .into_iter()
        .map(|z| class_one_probability(z[0], z[1]))
        .collect()
}

/// Mean token probability over content positions.
pub fn score_sequence(probs: &[f64], content: &[bool]) -> Result<f64> {
    if probs.len() != content.len() {
        return Err(Error::Shape(format!(
            "{} probabilities for a mask of {}",
            probs.len(),
            content.len()
        )));
    }
    let (sum, n) = probs
        .iter()
        .zip(content)
        .filter(|(_, &c)| c)
        .fold((0.0, 0usize), |(s, n), (p, _)| (s + p, n + 1));
    if n == 0 {
        return Err(Error::Degenerate("sequence has no content tokens to average".into()));
    }
    Ok(sum / n as f64)
}

/// Map a [0, 1] score onto the [0, 10] reporting scale.
pub fn rescale(score01: f64) -> f64 {
    10.0 * score01
}

pub fn unscale(score: f64) -> f64 {
    score / 10.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Uniform};

    fn random_head(h: usize, seed: u64) -> RegressionHead {
        let u = Uniform::new(-1.0, 1.0).unwrap();
        let mut rng = crate::seed::rng(seed);
        RegressionHead {
            weights: Array2::from_shape_simple_fn((h, 2), || u.sample(&mut rng)),
            bias: Array1::from_shape_simple_fn(2, || u.sample(&mut rng)),
        }
    }

    fn random_hidden(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let u = Uniform::new(-3.0, 3.0).unwrap();
        let mut rng = crate::seed::rng(seed);
        Array2::from_shape_simple_fn((rows, cols), || u.sample(&mut rng))
    }

    #[test]
    fn zero_head_gives_one_half() {
        let h = random_hidden(5, 4, 0);
        assert!(token_probs(&h, &RegressionHead::zeros(4)).iter().all(|&p| p == 0.5));
    }

    #[test]
    fn biased_head_dominates() {
        let h = random_hidden(5, 4, 1);
        let mut head = RegressionHead::zeros(4);
        head.bias[1] = 10.0;
        assert!(token_probs(&h, &head).iter().all(|&p| p > 0.9999));
    }

    #[test]
    fn matches_exp_normalize_oracle() {
        let h = random_hidden(7, 5, 2);
        let head = random_head(5, 3);
        let probs = token_probs(&h, &head);
        for (i, p) in probs.iter().enumerate() {
            let mut z = [head.bias[0], head.bias[1]];
            for c in 0..2 {
                for k in 0..5 {
                    z[c] += h[[i, k]] * head.weights[[k, c]];
                }
            }
            let e = [z[0].exp(), z[1].exp()];
            assert!((p - e[1] / (e[0] + e[1])).abs() < 1e-14);
        }
    }

    #[test]
    fn extreme_logits_stay_finite() {
        assert_eq!(class_one_probability(0.0, 1000.0), 1.0);
        assert_eq!(class_one_probability(1000.0, 0.0), 0.0);
    }

    #[test]
    fn averaging_rules() {
        assert_eq!(score_sequence(&[0.5; 4], &[true; 4]).unwrap(), 0.5);
        assert_eq!(score_sequence(&[0.1, 0.9, 0.3], &[false, true, false]).unwrap(), 0.9);
        assert!(score_sequence(&[0.5, 0.5], &[false, false]).is_err());
        assert!(score_sequence(&[0.5], &[true, false]).is_err());
    }

    #[test]
    fn rescale_endpoints() {
        assert_eq!(rescale(0.5), 5.0);
        assert_eq!(rescale(0.0), 0.0);
        assert_eq!(rescale(1.0), 10.0);
    }

    proptest! {
        #[test]
        fn mixed_mean_oracle(probs in prop::collection::vec((0.0f64..1.0, any::<bool>()), 1..50)) {
            let p: Vec<f64> = probs.iter().map(|x| x.0).collect();
            let m: Vec<bool> = probs.iter().map(|x| x.1).collect();
            let chosen: Vec<f64> = probs.iter().filter(|x| x.1).map(|x| x.0).collect();
            match score_sequence(&p, &m) {
                Ok(s) => {
                    let oracle = chosen.iter().sum::<f64>() / chosen.len() as f64;
                    prop_assert!((s - oracle).abs() < 1e-12);
                    prop_assert!((0.0..=1.0).contains(&s));
                }
                Err(_) => prop_assert!(chosen.is_empty()),
            }
        }

        // Appending a token with probability p moves the mean strictly toward p.
        #[test]
        fn appending_moves_toward_token(probs in prop::collection::vec(0.0f64..1.0, 1..30), p in 0.0f64..1.0) {
            let mask = vec![true; probs.len()];
            let before = score_sequence(&probs, &mask).unwrap();
            let mut longer = probs.clone();
            longer.push(p);
            let after = score_sequence(&longer, &vec![true; longer.len()]).unwrap();
            if (p - before).abs() > 1e-9 {
                prop_assert!((p - after).abs() < (p - before).abs());
                prop_assert!((after - before).signum() == (p - before).signum());
            }
        }

        #[test]
        fn rescale_roundtrip(x in 0.0f64..1.0) {
            prop_assert!((unscale(rescale(x)) - x).abs() < 1e-12);
        }
    }
}
