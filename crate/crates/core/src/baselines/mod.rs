//! Tree-ensemble regression baselines over pooled sentence embeddings.

pub mod forest;
pub mod gbdt;
pub mod tree;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub use forest::{fit_forest, ForestModel, ForestParams};
pub use gbdt::{fit_gbdt, GbdtModel, GbdtParams};
pub use tree::{fit_tree, Node, RegressionTree, TreeParams};

use crate::corpus::PerceptionDimension;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    DecisionTree,
    RandomForest,
    Gbdt,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 3] = [BaselineKind::DecisionTree, BaselineKind::RandomForest, BaselineKind::Gbdt];

    /// Row label used in comparison reports.
    pub fn label(self) -> &'static str {
        match self {
            BaselineKind::DecisionTree => "Decision Tree",
            BaselineKind::RandomForest => "Random Forest",
            BaselineKind::Gbdt => "GBDT",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            BaselineKind::DecisionTree => "decision_tree",
            BaselineKind::RandomForest => "random_forest",
            BaselineKind::Gbdt => "gbdt",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.slug() == s || k.slug().replace('_', "-") == s)
            .ok_or_else(|| Error::Usage(format!("unknown baseline {s:?}; expected decision_tree, random_forest or gbdt")))
    }
}

/// Hyperparameters for all three baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct BaselineParams {
    pub tree: TreeParams,
    pub forest: ForestParams,
    pub gbdt: GbdtParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineModel {
    DecisionTree(RegressionTree),
    RandomForest(ForestModel),
    Gbdt(GbdtModel),
}

impl BaselineModel {
    pub fn kind(&self) -> BaselineKind {
        match self {
            BaselineModel::DecisionTree(_) => BaselineKind::DecisionTree,
            BaselineModel::RandomForest(_) => BaselineKind::RandomForest,
            BaselineModel::Gbdt(_) => BaselineKind::Gbdt,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            BaselineModel::DecisionTree(t) => t.n_features,
            BaselineModel::RandomForest(f) => f.trees[0].n_features,
            BaselineModel::Gbdt(g) => g.stages.first().map_or(0, |t| t.n_features),
        }
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        match self {
            BaselineModel::DecisionTree(t) => t.predict_row(row),
            BaselineModel::RandomForest(f) => f.predict_row(row),
            BaselineModel::Gbdt(g) => g.predict_row(row),
        }
    }
}

pub fn fit_baseline(kind: BaselineKind, features: ArrayView2<f64>, targets: &[f64], params: &BaselineParams) -> Result<BaselineModel> {
    Ok(match kind {
        BaselineKind::DecisionTree => BaselineModel::DecisionTree(fit_tree(features, targets, &params.tree)?),
        BaselineKind::RandomForest => BaselineModel::RandomForest(fit_forest(features, targets, &params.forest)?),
        BaselineKind::Gbdt => BaselineModel::Gbdt(fit_gbdt(features, targets, &params.gbdt)?),
    })
}

pub fn predict_baseline(model: &BaselineModel, features: ArrayView2<f64>) -> Result<Vec<f64>> {
    if features.ncols() != model.n_features() {
        return Err(Error::Shape(format!(
            "model expects {} features, got {}",
            model.n_features(),
            features.ncols()
        )));
    }
    Ok(features
        .rows()
        .into_iter()
        .map(|r| match r.as_slice() {
            Some(s) => model.predict_row(s),
            None => model.predict_row(&r.to_vec()),
        })
        .collect())
}

/// One fitted baseline per perception dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSet {
    pub kind: BaselineKind,
    pub models: Vec<(PerceptionDimension, BaselineModel)>,
}

impl BaselineSet {
    /// Fit one model per dimension; `targets[i]` holds row `i`'s six scores.
    pub fn fit(kind: BaselineKind, features: &Array2<f64>, targets: &[[f64; 6]], params: &BaselineParams) -> Result<Self> {
        let models = PerceptionDimension::ALL
            .iter()
            .map(|&d| {
                let y: Vec<f64> = targets.iter().map(|t| t[d.index()]).collect();
                Ok((d, fit_baseline(kind, features.view(), &y, params)?))
            })
            .collect::<Result<_>>()?;
        Ok(BaselineSet { kind, models })
    }

    pub fn predict(&self, features: &Array2<f64>) -> Result<Vec<[f64; 6]>> {
        let mut out = vec![[0.0; 6]; features.nrows()];
        for (d, m) in &self.models {
            for (o, p) in out.iter_mut().zip(predict_baseline(m, features.view())?) {
                o[d.index()] = p;
            }
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)?;
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
