use ndarray::{Array2, ArrayView2};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub momentum: f64,
    pub final_momentum: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            exaggeration: 12.0,
            exaggeration_iterations: 250,
            momentum: 0.5,
            final_momentum: 0.8,
            seed: 0,
        }
    }
}

pub const PERPLEXITY_TOLERANCE: f64 = 1e-4;
pub const MAX_BISECTION_STEPS: usize = 50;

/// Conditional affinities `p_{j|i}` of one point, given its squared
/// distances to every other point.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub probabilities: Vec<f64>,
    /// Precision `1 / (2σ²)` of the Gaussian kernel.
    pub beta: f64,
    pub perplexity: f64,
}

fn kernel(d2: &[f64], beta: f64) -> (Vec<f64>, f64) {
    let dmin = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let mut p: Vec<f64> = d2.iter().map(|&d| (-beta * (d - dmin)).exp()).collect();
    let sum: f64 = p.iter().sum();
    let weighted: f64 = p.iter().zip(d2).map(|(pj, d)| pj * (d - dmin)).sum();
    let entropy = sum.ln() + beta * weighted / sum;
    for v in &mut p {
        *v /= sum;
    }
    (p, entropy.exp())
}

/// Bisection on `ln β` until the row's perplexity is within
/// [`PERPLEXITY_TOLERANCE`] of `target`, or [`MAX_BISECTION_STEPS`] steps.
pub fn calibrate_row(d2: &[f64], target: f64) -> Calibration {
    let positive: Vec<f64> = d2.iter().copied().filter(|&d| d > 0.0).collect();
    let scale = if positive.is_empty() { 1.0 } else { positive.iter().sum::<f64>() / positive.len() as f64 };
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    let mut best: Option<Calibration> = None;
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let beta = mid.exp() / scale;
        let (p, perp) = kernel(d2, beta);
        let err = perp - target;
        let better = best.as_ref().is_none_or(|b| err.abs() < (b.perplexity - target).abs());
        if better {
            best = Some(Calibration { probabilities: p, beta, perplexity: perp });
        }
        if err.abs() < PERPLEXITY_TOLERANCE {
            break;
        }
        if err > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best.unwrap()
}

fn squared_distances(x: ArrayView2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum())
                .collect()
        })
        .collect();
    Array2::from_shape_fn((n, n), |(i, j)| rows[i][j])
}

/// Row-stochastic conditional affinities, diagonal zero.
pub fn conditional_affinities(x: ArrayView2<f64>, perplexity: f64) -> Array2<f64> {
    let n = x.nrows();
    let d2 = squared_distances(x);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let others: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d2[[i, j]]).collect();
            let c = calibrate_row(&others, perplexity);
            let mut row = c.probabilities;
            row.insert(i, 0.0);
            row
        })
        .collect();
    Array2::from_shape_fn((n, n), |(i, j)| rows[i][j])
}

/// Symmetrized joint affinities `(p_{j|i} + p_{i|j}) / 2N`.
pub fn joint_affinities(x: ArrayView2<f64>, perplexity: f64) -> Array2<f64> {
    let c = conditional_affinities(x, perplexity);
    let n = c.nrows() as f64;
    Array2::from_shape_fn(c.dim(), |(i, j)| (c[[i, j]] + c[[j, i]]) / (2.0 * n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneResult {
    pub embedding: Array2<f64>,
    /// Perplexity actually used, after any reduction for small inputs.
    pub perplexity: f64,
    pub initial_kl: f64,
    pub final_kl: f64,
    pub warnings: Vec<String>,
}

/// Student-t numerators `1 / (1 + |y_i − y_j|²)` (diagonal zero) and their sum.
fn student_t(y: &Array2<f64>) -> (Array2<f64>, f64) {
    let n = y.nrows();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        let dx = y[[i, 0]] - y[[j, 0]];
                        let dy = y[[i, 1]] - y[[j, 1]];
                        1.0 / (1.0 + dx * dx + dy * dy)
                    }
                })
                .collect()
        })
        .collect();
    let z: f64 = rows.iter().map(|r| r.iter().sum::<f64>()).sum();
    (Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]), z)
}

/// `KL(P ‖ Q)` for the embedding `y`.
pub fn kl_divergence(p: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let (num, z) = student_t(y);
    let mut kl = 0.0;
    for ((i, j), &pij) in p.indexed_iter() {
        if i != j && pij > 0.0 {
            let q = (num[[i, j]] / z).max(f64::MIN_POSITIVE);
            kl += pij * (pij / q).ln();
        }
    }
    kl
}

/// Exact t-SNE to two dimensions.
pub fn tsne(x: ArrayView2<f64>, config: &TsneConfig) -> Result<TsneResult> {
    let n = x.nrows();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("t-SNE input contains non-finite values".into()));
    }
    if n < 4 {
        return Err(Error::InvalidInput(format!("t-SNE needs at least 4 points, got {n}")));
    }
    let mut warnings = Vec::new();
    let mut perplexity = config.perplexity;
    if (n as f64) < 3.0 * perplexity {
        perplexity = ((n - 1) / 3) as f64;
        warnings.push(format!("perplexity {} too large for {n} points, using {perplexity}", config.perplexity));
    }
    let p = joint_affinities(x, perplexity);

    let mut rng = seed::rng(config.seed);
    let init = Normal::new(0.0, 1e-4).unwrap();
    let mut y = Array2::from_shape_fn((n, 2), |_| init.sample(&mut rng));
    let initial_kl = kl_divergence(&p, &y);
    let mut update = Array2::<f64>::zeros((n, 2));
    let mut gains = Array2::<f64>::ones((n, 2));

    for it in 0..config.iterations {
        let early = it < config.exaggeration_iterations;
        let ex = if early { config.exaggeration } else { 1.0 };
        let momentum = if early { config.momentum } else { config.final_momentum };
        let (num, z) = student_t(&y);
        let grads: Vec<[f64; 2]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = [0.0; 2];
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let w = (ex * p[[i, j]] - num[[i, j]] / z) * num[[i, j]];
                    g[0] += w * (y[[i, 0]] - y[[j, 0]]);
                    g[1] += w * (y[[i, 1]] - y[[j, 1]]);
                }
                [4.0 * g[0], 4.0 * g[1]]
            })
            .collect();
        for (i, g) in grads.iter().enumerate() {
            for c in 0..2 {
                let same_sign = (g[c] > 0.0) == (update[[i, c]] > 0.0);
                gains[[i, c]] = if same_sign { gains[[i, c]] * 0.8 } else { gains[[i, c]] + 0.2 };
                gains[[i, c]] = gains[[i, c]].max(0.01);
                update[[i, c]] = momentum * update[[i, c]] - config.learning_rate * gains[[i, c]] * g[c];
                y[[i, c]] += update[[i, c]];
            }
        }
        for c in 0..2 {
            let mean = y.column(c).sum() / n as f64;
            y.column_mut(c).mapv_inplace(|v| v - mean);
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("t-SNE diverged".into()));
    }
    let final_kl = kl_divergence(&p, &y);
    Ok(TsneResult { embedding: y, perplexity, initial_kl, final_kl, warnings })
}

/// Ranks of every other point by distance from each point (nearest is 1),
/// ties by index.
fn neighbour_order(x: ArrayView2<f64>) -> Vec<Vec<usize>> {
    let d2 = squared_distances(x);
    (0..x.nrows())
        .map(|i| {
            let mut idx: Vec<usize> = (0..x.nrows()).filter(|&j| j != i).collect();
            idx.sort_by(|&a, &b| d2[[i, a]].total_cmp(&d2[[i, b]]).then(a.cmp(&b)));
            idx
        })
        .collect()
}

/// How well the `k`-neighbourhoods of the embedding `y` are neighbourhoods
/// of the input `x`; 1 means no intruders.
pub fn trustworthiness(x: ArrayView2<f64>, y: ArrayView2<f64>, k: usize) -> Result<f64> {
    let n = x.nrows();
    if y.nrows() != n {
        return Err(Error::Shape(format!("{n} inputs but {} embedded points", y.nrows())));
    }
    if k == 0 || 2 * n < 3 * k + 2 {
        return Err(Error::InvalidInput(format!("trustworthiness with k = {k} needs more than {n} points")));
    }
    let ox = neighbour_order(x);
    let oy = neighbour_order(y);
    let mut penalty = 0.0;
    for i in 0..n {
        let mut rank = vec![0usize; n];
        for (r, &j) in ox[i].iter().enumerate() {
            rank[j] = r + 1;
        }
        for &j in &oy[i][..k] {
            if rank[j] > k {
                penalty += (rank[j] - k) as f64;
            }
        }
    }
    let (n, k) = (n as f64, k as f64);
    Ok(1.0 - 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0)) * penalty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{axis_centers, gaussian_blobs};
    use rand::Rng as _;

    fn random_points(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = seed::rng(seed);
        Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn calibration_hits_the_target_perplexity() {
        let mut rng = seed::rng(1);
        for _ in 0..50 {
            let d2: Vec<f64> = (0..80).map(|_| rng.random_range(0.0..25.0)).collect();
            let target = rng.random_range(2.0..40.0);
            let c = calibrate_row(&d2, target);
            // Recompute the entropy from the returned probabilities.
            let h: f64 = -c.probabilities.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>();
            assert!((h.exp() - target).abs() < PERPLEXITY_TOLERANCE, "{} vs {target}", h.exp());
            assert!((c.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn affinities_normalize_and_symmetrize() {
        let x = random_points(40, 5, 2);
        let c = conditional_affinities(x.view(), 10.0);
        for i in 0..40 {
            assert_eq!(c[[i, i]], 0.0);
            assert!((c.row(i).sum() - 1.0).abs() < 1e-9);
        }
        let p = joint_affinities(x.view(), 10.0);
        assert!((p.sum() - 1.0).abs() < 1e-9);
        assert!(p.iter().all(|&v| v >= 0.0));
        for i in 0..40 {
            for j in 0..40 {
                assert_eq!(p[[i, j]], p[[j, i]]);
            }
        }
    }

    #[test]
    fn duplicates_are_allowed_and_nan_is_not() {
        let mut x = random_points(12, 3, 3);
        let r = x.row(0).to_owned();
        x.row_mut(1).assign(&r);
        let cfg = TsneConfig { iterations: 50, ..TsneConfig::default() };
        let out = tsne(x.view(), &cfg).unwrap();
        assert_eq!(out.perplexity, 3.0);
        assert_eq!(out.warnings.len(), 1);
        x[[3, 1]] = f64::NAN;
        assert!(matches!(tsne(x.view(), &cfg), Err(Error::Numerical(_))));
    }

    #[test]
    fn deterministic_given_seed() {
        let x = random_points(30, 4, 5);
        let cfg = TsneConfig { iterations: 100, perplexity: 5.0, seed: 3, ..TsneConfig::default() };
        assert_eq!(tsne(x.view(), &cfg).unwrap(), tsne(x.view(), &cfg).unwrap());
    }

    #[test]
    fn blobs_embed_faithfully() {
        let (x, _) = gaussian_blobs(&axis_centers(3, 10, 10.0), 50, 1.0, 4);
        let out = tsne(x.view(), &TsneConfig { seed: 4, ..TsneConfig::default() }).unwrap();
        assert!(out.final_kl < out.initial_kl);
        let t = trustworthiness(x.view(), out.embedding.view(), 10).unwrap();
        assert!(t >= 0.8, "trustworthiness {t}");
    }

    #[test]
    fn trustworthiness_cases() {
        let x = random_points(30, 3, 6);
        assert!((trustworthiness(x.view(), x.view(), 5).unwrap() - 1.0).abs() < 1e-15);
        let scaled = x.mapv(|v| 3.0 * v);
        assert!((trustworthiness(x.view(), scaled.view(), 5).unwrap() - 1.0).abs() < 1e-15);
        let y = random_points(30, 2, 7);
        let t = trustworthiness(x.view(), y.view(), 5).unwrap();
        assert!(t < 1.0 && t > 0.0);
        assert!(trustworthiness(x.view(), y.view(), 20).is_err());
    }
}
