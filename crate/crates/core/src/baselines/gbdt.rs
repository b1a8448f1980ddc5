use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::tree::{check_data, Grower, RegressionTree, TreeParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            n_stages: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub params: GbdtParams,
    pub initial: f64,
    pub stages: Vec<RegressionTree>,
    /// Training MSE after the constant fit and after each stage.
    pub train_mse: Vec<f64>,
}

impl GbdtModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.initial + self.params.learning_rate * self.stages.iter().map(|t| t.predict_row(row)).sum::<f64>()
    }
}

/// Least-squares boosting: each stage fits a depth-limited tree to the
/// current residuals.
pub fn fit_gbdt(features: ArrayView2<f64>, targets: &[f64], params: &GbdtParams) -> Result<GbdtModel> {
    check_data(features, targets)?;
    if params.n_stages == 0 {
        return Err(Error::InvalidInput("boosting needs at least one stage".into()));
    }
    let n = targets.len();
    let initial = targets.iter().sum::<f64>() / n as f64;
    let mut stage_sum = vec![0.0; n];
    let pred = |s: f64| initial + params.learning_rate * s;
    let mse_of = |sums: &[f64]| targets.iter().zip(sums).map(|(y, &s)| (y - pred(s)).powi(2)).sum::<f64>() / n as f64;
    let mut train_mse = vec![mse_of(&stage_sum)];
    let mut stages = Vec::with_capacity(params.n_stages);
    let tree_params = TreeParams {
        max_depth: Some(params.max_depth),
        min_leaf: params.min_leaf,
    };
    for _ in 0..params.n_stages {
        let residuals: Vec<f64> = targets.iter().zip(&stage_sum).map(|(y, &s)| y - pred(s)).collect();
        let tree = Grower {
            x: features,
            y: &residuals,
            params: tree_params,
            subsample: None,
        }
        .grow((0..n).collect());
        for (i, row) in features.rows().into_iter().enumerate() {
            stage_sum[i] += tree.predict_row(row.as_slice().unwrap());
        }
        stages.push(tree);
        train_mse.push(mse_of(&stage_sum));
    }
    Ok(GbdtModel {
        params: *params,
        initial,
        stages,
        train_mse,
    })
}
