//! Regression metrics, side-by-side model comparison, and the migration
//! harness that scores a trained model against manual ratings elsewhere.

pub mod metrics;
pub mod migrate;
pub mod report;

pub use metrics::{mae, mse, pearson, r2};
pub use migrate::{migrate, migrate_predictions, MigrationLocation, MigrationResult, MigrationSet, RatingScale, ScatterPoint};
pub use report::{compare, evaluate, improvement, ComparisonTable, DimMetrics, MetricReport, COMPARISON_FOOTNOTES};
