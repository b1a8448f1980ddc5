use ndarray::ArrayView2;
use rand::{Rng as _, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{check_data, Grower, RegressionTree, TreeParams};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Fraction of features drawn at every split, in (0, 1].
    pub feature_fraction: f64,
    pub bootstrap: bool,
    pub tree: TreeParams,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            feature_fraction: 1.0 / 3.0,
            bootstrap: true,
            tree: TreeParams {
                max_depth: None,
                min_leaf: 5,
            },
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    /// Seed each tree drew its bootstrap sample and feature subsets from.
    pub tree_seeds: Vec<u64>,
    pub trees: Vec<RegressionTree>,
}

impl ForestModel {
    /// Mean of member-tree predictions, summed in tree order.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Bagged CART trees with per-split feature subsampling. Trees grow in
/// parallel; each owns its seed, so the result does not depend on the
/// thread count.
pub fn fit_forest(features: ArrayView2<f64>, targets: &[f64], params: &ForestParams) -> Result<ForestModel> {
    check_data(features, targets)?;
    if params.n_trees == 0 {
        return Err(Error::InvalidInput("a forest needs at least one tree".into()));
    }
    if !(params.feature_fraction > 0.0 && params.feature_fraction <= 1.0) {
        return Err(Error::InvalidInput(format!("feature fraction {} outside (0, 1]", params.feature_fraction)));
    }
    let mut master = seed::rng(params.seed);
    let tree_seeds: Vec<u64> = (0..params.n_trees).map(|_| master.next_u64()).collect();
    let n = targets.len();
    let p = features.ncols();
    let k = ((params.feature_fraction * p as f64).ceil() as usize).clamp(1, p);
    let trees = tree_seeds
        .par_iter()
        .map(|&s| {
            let mut rng = seed::rng(s);
            let rows: Vec<usize> = if params.bootstrap {
                let mut r: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                r.sort_unstable();
                r
            } else {
                (0..n).collect()
            };
            Grower {
                x: features,
                y: targets,
                params: params.tree,
                subsample: Some((k, &mut rng)),
            }
            .grow(rows)
        })
        .collect();
    Ok(ForestModel {
        params: *params,
        tree_seeds,
        trees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::tree::fit_tree;
    use ndarray::Array2;

    fn data(n: usize, p: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
        let mut rng = seed::rng(seed);
        let x = Array2::from_shape_simple_fn((n, p), || rng.random_range(-1.0f64..1.0));
        let y = x.rows().into_iter().map(|r| r[0] * 2.0 - r[1].abs() + 0.1 * r[2]).collect();
        (x, y)
    }

    #[test]
    fn single_tree_without_randomness_is_cart() {
        let (x, y) = data(80, 4, 1);
        let tree = TreeParams { max_depth: Some(4), min_leaf: 2 };
        let forest = fit_forest(
            x.view(),
            &y,
            &ForestParams { n_trees: 1, feature_fraction: 1.0, bootstrap: false, tree, seed: 3 },
        )
        .unwrap();
        assert_eq!(forest.trees[0], fit_tree(x.view(), &y, &tree).unwrap());
    }

    #[test]
    fn prediction_is_member_mean() {
        let (x, y) = data(60, 5, 2);
        let f = fit_forest(x.view(), &y, &ForestParams { n_trees: 7, ..Default::default() }).unwrap();
        for r in x.rows() {
            let row = r.as_slice().unwrap();
            let oracle: f64 = f.trees.iter().map(|t| t.predict_row(row)).collect::<Vec<_>>().iter().sum::<f64>() / 7.0;
            assert_eq!(f.predict_row(row), oracle);
        }
    }

    #[test]
    fn same_seed_same_forest() {
        let (x, y) = data(50, 3, 4);
        let params = ForestParams { n_trees: 5, seed: 11, ..Default::default() };
        assert_eq!(fit_forest(x.view(), &y, &params).unwrap(), fit_forest(x.view(), &y, &params).unwrap());
        let other = ForestParams { seed: 12, ..params };
        assert_ne!(fit_forest(x.view(), &y, &params).unwrap(), fit_forest(x.view(), &y, &other).unwrap());
    }

    #[test]
    fn thread_count_does_not_matter() {
        let (x, y) = data(70, 6, 5);
        let params = ForestParams { n_trees: 9, ..Default::default() };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| fit_forest(x.view(), &y, &params).unwrap());
        let b = four.install(|| fit_forest(x.view(), &y, &params).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_zero_trees() {
        let (x, y) = data(10, 3, 6);
        assert!(fit_forest(x.view(), &y, &ForestParams { n_trees: 0, ..Default::default() }).is_err());
    }
}
