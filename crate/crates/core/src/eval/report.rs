use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::metrics::{mae, mse, pearson, r2};
use crate::corpus::{id_set_hash, PerceptionDimension};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimMetrics {
    pub mse: f64,
    pub r2: f64,
    pub mae: f64,
    /// `None` when predictions or targets are constant.
    pub pearson: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    /// Hash of the evaluated image ids; see [`id_set_hash`].
    pub split_hash: String,
    pub n: usize,
    pub dimensions: BTreeMap<PerceptionDimension, DimMetrics>,
}

impl MetricReport {
    pub fn dim(&self, d: PerceptionDimension) -> &DimMetrics {
        &self.dimensions[&d]
    }
}

/// Per-dimension metrics over the images present in both maps.
pub fn evaluate(model: &str, predictions: &BTreeMap<String, [f64; 6]>, targets: &BTreeMap<String, [f64; 6]>) -> Result<MetricReport> {
    let ids: Vec<&String> = predictions.keys().filter(|id| targets.contains_key(*id)).collect();
    if ids.is_empty() {
        return Err(Error::Degenerate("no image has both a prediction and a target".into()));
    }
    let mut dimensions = BTreeMap::new();
    for d in PerceptionDimension::ALL {
        let y: Vec<f64> = ids.iter().map(|id| targets[*id][d.index()]).collect();
        let yh: Vec<f64> = ids.iter().map(|id| predictions[*id][d.index()]).collect();
        let m = DimMetrics {
            mse: mse(&y, &yh)?,
            r2: r2(&y, &yh).map_err(|e| Error::Degenerate(format!("{d}: {e}")))?,
            mae: mae(&y, &yh)?,
            pearson: pearson(&y, &yh)?,
        };
        dimensions.insert(d, m);
    }
    Ok(MetricReport {
        model: model.to_string(),
        split_hash: id_set_hash(ids.iter().map(|s| s.as_str())),
        n: ids.len(),
        dimensions,
    })
}

/// Models as rows, (dimension × {MSE, R²}) as columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub split_hash: String,
    pub reports: Vec<MetricReport>,
    /// `best_mse[d][r]`: report `r` attains the lowest MSE in dimension `d`.
    pub best_mse: Vec<Vec<bool>>,
    pub best_r2: Vec<Vec<bool>>,
}

pub fn compare(reports: &[MetricReport]) -> Result<ComparisonTable> {
    if reports.len() < 2 {
        return Err(Error::InvalidInput("a comparison needs at least two reports".into()));
    }
    let hash = &reports[0].split_hash;
    if let Some(r) = reports.iter().find(|r| &r.split_hash != hash) {
        return Err(Error::InvalidInput(format!(
            "report {:?} was evaluated on a different test split than {:?}",
            r.model, reports[0].model
        )));
    }
    let mark = |d: PerceptionDimension, key: fn(&DimMetrics) -> f64| {
        let best = reports.iter().map(|r| key(r.dim(d))).fold(f64::NEG_INFINITY, f64::max);
        reports.iter().map(|r| key(r.dim(d)) == best).collect::<Vec<bool>>()
    };
    Ok(ComparisonTable {
        split_hash: hash.clone(),
        reports: reports.to_vec(),
        best_mse: PerceptionDimension::ALL.iter().map(|&d| mark(d, |m| -m.mse)).collect(),
        best_r2: PerceptionDimension::ALL.iter().map(|&d| mark(d, |m| m.r2)).collect(),
    })
}

pub const COMPARISON_FOOTNOTES: [&str; 2] = [
    "* best value in the column.",
    "Improvement: mean over dimensions of the relative MSE reduction against the best other model in that dimension.",
];

impl ComparisonTable {
    /// CSV: `model`, then `<dim>_mse,<dim>_r2` per dimension, then one
    /// `<dim>_mse_best,<dim>_r2_best` flag pair per dimension.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["model".to_string()];
        for d in PerceptionDimension::ALL {
            header.push(format!("{d}_mse"));
            header.push(format!("{d}_r2"));
        }
        for d in PerceptionDimension::ALL {
            header.push(format!("{d}_mse_best"));
            header.push(format!("{d}_r2_best"));
        }
        w.write_record(&header)?;
        for (ri, r) in self.reports.iter().enumerate() {
            let mut row = vec![r.model.clone()];
            for d in PerceptionDimension::ALL {
                row.push(format!("{:.6}", r.dim(d).mse));
                row.push(format!("{:.6}", r.dim(d).r2));
            }
            for d in PerceptionDimension::ALL {
                row.push(u8::from(self.best_mse[d.index()][ri]).to_string());
                row.push(u8::from(self.best_r2[d.index()][ri]).to_string());
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<comparison csv>", e))?;
        Ok(())
    }

    /// Aligned plain-text table with two decimals, best cells starred.
    pub fn render_text(&self) -> String {
        let name_w = self.reports.iter().map(|r| r.model.chars().count()).max().unwrap_or(5).max(5);
        let cell = 8;
        let mut s = String::new();
        let _ = write!(s, "{:name_w$}", "Model");
        for d in PerceptionDimension::ALL {
            let title = d.title();
            let _ = write!(s, "  {title:<w$}", w = 2 * cell + 1);
        }
        s.push('\n');
        let _ = write!(s, "{:name_w$}", "");
        for _ in PerceptionDimension::ALL {
            let _ = write!(s, "  {:<cell$} {:<cell$}", "MSE", "R^2");
        }
        s.push('\n');
        for (ri, r) in self.reports.iter().enumerate() {
            let _ = write!(s, "{:name_w$}", r.model);
            for d in PerceptionDimension::ALL {
                let m = r.dim(d);
                let star = |b: bool| if b { "*" } else { "" };
                let mse_cell = format!("{:.2}{}", m.mse, star(self.best_mse[d.index()][ri]));
                let r2_cell = format!("{:.2}{}", m.r2, star(self.best_r2[d.index()][ri]));
                let _ = write!(s, "  {mse_cell:<cell$} {r2_cell:<cell$}");
            }
            s.push('\n');
        }
        s = s.lines().map(str::trim_end).collect::<Vec<_>>().join("\n");
        s.push('\n');
        for f in COMPARISON_FOOTNOTES {
            s.push_str(f);
            s.push('\n');
        }
        s
    }
}

/// Mean over dimensions of `(best_other − reference) / best_other` on MSE,
/// in percent. "Other" is every report except the reference.
pub fn improvement(table: &ComparisonTable, reference: &str) -> Result<f64> {
    let r = table
        .reports
        .iter()
        .find(|r| r.model == reference)
        .ok_or_else(|| Error::InvalidInput(format!("reference model {reference:?} not in the table")))?;
    let mut total = 0.0;
    for d in PerceptionDimension::ALL {
        let best = table
            .reports
            .iter()
            .filter(|o| o.model != reference)
            .map(|o| o.dim(d).mse)
            .fold(f64::INFINITY, f64::min);
        if !(best > 0.0 && best.is_finite()) {
            return Err(Error::Degenerate(format!("{d}: best other MSE is {best}")));
        }
        total += (best - r.dim(d).mse) / best;
    }
    Ok(100.0 * total / 6.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn report(model: &str, hash: &str, mses: [f64; 6], r2s: [f64; 6]) -> MetricReport {
        MetricReport {
            model: model.into(),
            split_hash: hash.into(),
            n: 10,
            dimensions: PerceptionDimension::ALL
                .iter()
                .map(|&d| (d, DimMetrics { mse: mses[d.index()], r2: r2s[d.index()], mae: 0.0, pearson: None }))
                .collect(),
        }
    }

    fn maps(n: usize, seed: u64) -> (BTreeMap<String, [f64; 6]>, BTreeMap<String, [f64; 6]>) {
        let mut rng = crate::seed::rng(seed);
        let mut p = BTreeMap::new();
        let mut t = BTreeMap::new();
        for i in 0..n {
            let y: [f64; 6] = std::array::from_fn(|_| rng.random_range(0.0..10.0));
            t.insert(format!("i{i}"), y);
            p.insert(format!("i{i}"), y.map(|v| v + rng.random_range(-1.0..1.0)));
        }
        (p, t)
    }

    #[test]
    fn perfect_predictions() {
        let (_, t) = maps(20, 1);
        let r = evaluate("m", &t, &t).unwrap();
        for d in PerceptionDimension::ALL {
            assert_eq!(r.dim(d).mse, 0.0);
            assert_eq!(r.dim(d).r2, 1.0);
        }
    }

    #[test]
    fn evaluate_matches_direct_recomputation() {
        let (mut p, t) = maps(30, 2);
        p.insert("extra".into(), [0.0; 6]);
        let r = evaluate("m", &p, &t).unwrap();
        assert_eq!(r.n, 30);
        for d in PerceptionDimension::ALL {
            let y: Vec<f64> = t.values().map(|v| v[d.index()]).collect();
            let yh: Vec<f64> = t.keys().map(|k| p[k][d.index()]).collect();
            let direct = y.iter().zip(&yh).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 30.0;
            assert!((r.dim(d).mse - direct).abs() < 1e-12);
        }
        assert_eq!(r.split_hash, id_set_hash(t.keys().map(|s| s.as_str())));
    }

    #[test]
    fn dominant_model_takes_every_mark() {
        let a = report("a", "h", [1.0; 6], [0.5; 6]);
        let b = report("b", "h", [2.0; 6], [0.2; 6]);
        let t = compare(&[b.clone(), a.clone()]).unwrap();
        assert!(t.best_mse.iter().all(|c| c == &vec![false, true]));
        assert!(t.best_r2.iter().all(|c| c == &vec![false, true]));
    }

    #[test]
    fn order_does_not_change_cells() {
        let a = report("a", "h", [1.0, 3.0, 2.0, 1.0, 5.0, 0.1], [0.5, 0.1, 0.3, 0.9, 0.2, 0.4]);
        let b = report("b", "h", [2.0, 1.0, 2.5, 0.5, 4.0, 0.2], [0.4, 0.6, 0.1, 0.2, 0.8, 0.3]);
        let ab = compare(&[a.clone(), b.clone()]).unwrap();
        let ba = compare(&[b, a]).unwrap();
        for d in 0..6 {
            assert_eq!(ab.best_mse[d], ba.best_mse[d].iter().rev().copied().collect::<Vec<_>>());
            assert_eq!(ab.best_r2[d], ba.best_r2[d].iter().rev().copied().collect::<Vec<_>>());
        }
    }

    #[test]
    fn marks_match_argmin_argmax() {
        let mut rng = crate::seed::rng(3);
        let reports: Vec<MetricReport> = (0..5)
            .map(|i| report(&format!("m{i}"), "h", std::array::from_fn(|_| rng.random_range(0.0..1.0)), std::array::from_fn(|_| rng.random_range(0.0..1.0))))
            .collect();
        let t = compare(&reports).unwrap();
        for d in PerceptionDimension::ALL {
            let argmin = (0..5).min_by(|&a, &b| reports[a].dim(d).mse.total_cmp(&reports[b].dim(d).mse)).unwrap();
            let argmax = (0..5).max_by(|&a, &b| reports[a].dim(d).r2.total_cmp(&reports[b].dim(d).r2)).unwrap();
            assert_eq!(t.best_mse[d.index()].iter().positions(), vec![argmin]);
            assert_eq!(t.best_r2[d.index()].iter().positions(), vec![argmax]);
        }
    }

    trait Positions {
        fn positions(self) -> Vec<usize>;
    }

    impl<'a, I: Iterator<Item = &'a bool>> Positions for I {
        fn positions(self) -> Vec<usize> {
            self.enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
        }
    }

    #[test]
    fn split_mismatch_is_rejected() {
        let a = report("a", "h1", [1.0; 6], [0.5; 6]);
        let b = report("b", "h2", [1.0; 6], [0.5; 6]);
        assert!(compare(&[a.clone(), b]).is_err());
        assert!(compare(&[a]).is_err());
    }

    #[test]
    fn improvement_cases() {
        let base = report("tree", "h", [2.0, 4.0, 1.0, 3.0, 2.0, 6.0], [0.0; 6]);
        let worse = report("forest", "h", [10.0; 6], [0.0; 6]);
        let half = report("head", "h", [1.0, 2.0, 0.5, 1.5, 1.0, 3.0], [0.0; 6]);
        let t = compare(&[half, base.clone(), worse.clone()]).unwrap();
        assert!((improvement(&t, "head").unwrap() - 50.0).abs() < 1e-12);
        let same = report("head", "h", [2.0, 4.0, 1.0, 3.0, 2.0, 6.0], [0.0; 6]);
        let t = compare(&[same, base, worse]).unwrap();
        assert!(improvement(&t, "head").unwrap().abs() < 1e-12);
        assert!(improvement(&t, "nope").is_err());
    }

    #[test]
    fn improvement_matches_hand_aggregate() {
        let mut rng = crate::seed::rng(9);
        for _ in 0..20 {
            let reports: Vec<MetricReport> = (0..4)
                .map(|i| report(&format!("m{i}"), "h", std::array::from_fn(|_| rng.random_range(0.1..2.0)), [0.0; 6]))
                .collect();
            let t = compare(&reports).unwrap();
            let mut hand = 0.0;
            for d in 0..6 {
                let best = (1..4).map(|i| reports[i].dimensions.values().nth(d).unwrap().mse).fold(f64::INFINITY, f64::min);
                hand += (best - reports[0].dimensions.values().nth(d).unwrap().mse) / best;
            }
            assert!((improvement(&t, "m0").unwrap() - hand / 6.0 * 100.0).abs() < 1e-9);
        }
    }
}
