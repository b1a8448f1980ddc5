use ndarray::ArrayView2;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: Some(10),
            min_leaf: 5,
        }
    }
}

/// One node of a flattened tree. Internal nodes carry `feature`,
/// `threshold` and both children; rows with `x[feature] <= threshold` go
/// left. Every node stores the mean target of its training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub feature: Option<usize>,
    pub threshold: Option<f64>,
    pub left: Option<usize>,
    pub right: Option<usize>,
    pub value: f64,
    pub samples: usize,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.feature.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub n_features: usize,
    pub params: TreeParams,
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            let n = &self.nodes[i];
            match (n.feature, n.threshold, n.left, n.right) {
                (Some(f), Some(t), Some(l), Some(r)) => i = if row[f] <= t { l } else { r },
                _ => return n.value,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &RegressionTree, i: usize) -> usize {
            match (t.nodes[i].left, t.nodes[i].right) {
                (Some(l), Some(r)) => 1 + go(t, l).max(go(t, r)),
                _ => 0,
            }
        }
        go(self, 0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }
}

pub(crate) fn check_data(features: ArrayView2<f64>, targets: &[f64]) -> Result<()> {
    if features.nrows() == 0 || features.ncols() == 0 {
        return Err(Error::InvalidInput("no training rows or no features".into()));
    }
    if features.nrows() != targets.len() {
        return Err(Error::Shape(format!("{} feature rows for {} targets", features.nrows(), targets.len())));
    }
    if features.iter().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite feature or target".into()));
    }
    Ok(())
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Greedy CART grower shared by the tree, forest and boosting fitters.
pub(crate) struct Grower<'a> {
    pub x: ArrayView2<'a, f64>,
    pub y: &'a [f64],
    pub params: TreeParams,
    /// Per-split feature subsampling: draw this many features without
    /// replacement from `rng`.
    pub subsample: Option<(usize, &'a mut Rng)>,
}

impl Grower<'_> {
    pub fn grow(mut self, rows: Vec<usize>) -> RegressionTree {
        let mut nodes = Vec::new();
        self.build(rows, 0, &mut nodes);
        RegressionTree {
            n_features: self.x.ncols(),
            params: self.params,
            nodes,
        }
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize, nodes: &mut Vec<Node>) -> usize {
        let mean = rows.iter().map(|&i| self.y[i]).sum::<f64>() / rows.len() as f64;
        let id = nodes.len();
        nodes.push(Node {
            feature: None,
            threshold: None,
            left: None,
            right: None,
            value: mean,
            samples: rows.len(),
        });
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if !depth_ok || rows.len() < 2 * self.params.min_leaf.max(1) {
            return id;
        }
        let Some(split) = self.best_split(&rows) else { return id };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[[i, split.feature]] <= split.threshold);
        let left = self.build(l, depth + 1, nodes);
        let right = self.build(r, depth + 1, nodes);
        let n = &mut nodes[id];
        n.feature = Some(split.feature);
        n.threshold = Some(split.threshold);
        n.left = Some(left);
        n.right = Some(right);
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.x.ncols();
        match self.subsample.as_mut() {
            Some((k, rng)) if *k < p => {
                let mut f = sample(*rng, p, (*k).max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        }
    }

    /// Largest SSE reduction over all admissible thresholds. Ties keep the
    /// lowest feature index, then the lowest threshold.
    fn best_split(&mut self, rows: &[usize]) -> Option<Split> {
        let n = rows.len();
        let min_leaf = self.params.min_leaf.max(1);
        let total: f64 = rows.iter().map(|&i| self.y[i]).sum();
        let scale = rows.iter().map(|&i| self.y[i] * self.y[i]).sum::<f64>().max(1.0);
        let mut best: Option<Split> = None;
        let mut order = rows.to_vec();
        for f in self.candidate_features() {
            order.sort_by(|&a, &b| self.x[[a, f]].total_cmp(&self.x[[b, f]]).then(a.cmp(&b)));
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                left_sum += self.y[order[k]];
                let nl = k + 1;
                let nr = n - nl;
                let (xv, xn) = (self.x[[order[k], f]], self.x[[order[k + 1], f]]);
                if nl < min_leaf || nr < min_leaf || xv == xn {
                    continue;
                }
                let diff = left_sum / nl as f64 - (total - left_sum) / nr as f64;
                let gain = (nl * nr) as f64 / n as f64 * diff * diff;
                if gain <= 1e-12 * scale {
                    continue;
                }
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Split { feature: f, threshold: xv, gain });
                }
            }
        }
        best
    }
}

/// Fit a CART regression tree on every row.
pub fn fit_tree(features: ArrayView2<f64>, targets: &[f64], params: &TreeParams) -> Result<RegressionTree> {
    check_data(features, targets)?;
    Ok(Grower {
        x: features,
        y: targets,
        params: *params,
        subsample: None,
    }
    .grow((0..targets.len()).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn column(xs: &[f64]) -> Array2<f64> {
        Array2::from_shape_vec((xs.len(), 1), xs.to_vec()).unwrap()
    }

    fn mse(t: &RegressionTree, x: &Array2<f64>, y: &[f64]) -> f64 {
        x.rows().into_iter().zip(y).map(|(r, v)| (t.predict_row(r.as_slice().unwrap()) - v).powi(2)).sum::<f64>() / y.len() as f64
    }

    #[test]
    fn constant_targets_give_one_leaf() {
        let x = column(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let t = fit_tree(x.view(), &[0.3; 6], &TreeParams { max_depth: None, min_leaf: 1 }).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert!((t.nodes[0].value - 0.3).abs() < 1e-15);
    }

    // Exhaustive oracle: try every cut of the sorted 1-D data.
    #[test]
    fn depth_one_step_function() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| if x <= 6.0 { 1.0 } else { 4.0 } + 0.01 * x).collect();
        let t = fit_tree(column(&xs).view(), &ys, &TreeParams { max_depth: Some(1), min_leaf: 1 }).unwrap();
        let mut best = (f64::INFINITY, 0.0);
        for cut in 1..xs.len() {
            let (l, r) = ys.split_at(cut);
            let sse = |s: &[f64]| {
                let m = s.iter().sum::<f64>() / s.len() as f64;
                s.iter().map(|v| (v - m).powi(2)).sum::<f64>()
            };
            let total = sse(l) + sse(r);
            if total < best.0 {
                best = (total, xs[cut - 1]);
            }
        }
        assert_eq!(t.nodes[0].threshold, Some(best.1));
        assert_eq!(best.1, 6.0);
        let left = &t.nodes[t.nodes[0].left.unwrap()];
        let right = &t.nodes[t.nodes[0].right.unwrap()];
        let lm = ys[..13].iter().sum::<f64>() / 13.0;
        let rm = ys[13..].iter().sum::<f64>() / 7.0;
        assert!((left.value - lm).abs() < 1e-12 && (right.value - rm).abs() < 1e-12);
    }

    #[test]
    fn min_leaf_is_respected() {
        let xs: Vec<f64> = (0..30).map(|i| ((i * 7) % 30) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let t = fit_tree(column(&xs).view(), &ys, &TreeParams { max_depth: None, min_leaf: 4 }).unwrap();
        assert!(t.leaves().all(|l| l.samples >= 4));
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        let x = Array2::from_shape_vec((4, 2), vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
        let t = fit_tree(x.view(), &[0.0, 0.0, 1.0, 1.0], &TreeParams { max_depth: Some(1), min_leaf: 1 }).unwrap();
        assert_eq!(t.nodes[0].feature, Some(0));
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        let x = Array2::<f64>::zeros((0, 3));
        assert!(fit_tree(x.view(), &[], &TreeParams::default()).is_err());
        let x = Array2::<f64>::zeros((2, 3));
        assert!(fit_tree(x.view(), &[1.0], &TreeParams::default()).is_err());
    }

    proptest! {
        #[test]
        fn unrestricted_tree_interpolates_distinct_rows(
            rows in prop::collection::btree_set((-50i32..50, -50i32..50), 2..40),
            seed in any::<u64>(),
        ) {
            let rows: Vec<(i32, i32)> = rows.into_iter().collect();
            let x = Array2::from_shape_fn((rows.len(), 2), |(i, j)| if j == 0 { rows[i].0 as f64 } else { rows[i].1 as f64 });
            let mut rng = crate::seed::rng(seed);
            let y: Vec<f64> = (0..rows.len()).map(|_| rand::Rng::random_range(&mut rng, -5.0..5.0)).collect();
            let t = fit_tree(x.view(), &y, &TreeParams { max_depth: None, min_leaf: 1 }).unwrap();
            prop_assert!(mse(&t, &x, &y) < 1e-20);
            for (r, v) in x.rows().into_iter().zip(&y) {
                prop_assert!((t.predict_row(r.as_slice().unwrap()) - v).abs() < 1e-9);
            }
        }
    }
}
