//! Partition agreement, leave-one-week-out cross-validation, cluster-count
//! selection, feature influence and man/zone naming of fitted components.

mod cv;
mod metrics;
mod semantics;

pub use cv::{
    feature_influence, lowo_cv_ari, select_g, AblationMode, CvReport, CvRow, FoldOutcome, FoldResult,
    InfluenceEntry, InfluenceReport,
};
pub use metrics::{adjusted_rand_index, ari, ari_labels, pair_counts, rand_index, PairCounts, Partition};
pub use semantics::{man_component, semantic_labels, LABEL_MAN, LABEL_ZONE, RATIO_COLUMN};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::features::FeatureTable;
use crate::gmm::{fit, FitConfig, GmmError, ModelDocument};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("partitions do not cover the same items: {0}")]
    PartitionMismatch(String),
    #[error("no item pairs to compare")]
    NoPairs,
    #[error("ARI undefined: zero denominator for non-identical partitions")]
    AriUndefined,
    #[error("need >= 2 weeks for leave-one-week-out cross-validation, found {0}")]
    TooFewWeeks(usize),
    #[error("no fold produced a defined ARI for G = {0}")]
    NoDefinedFolds(usize),
    #[error("{0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Gmm(#[from] GmmError),
}

/// Per-column mean over non-missing cells of `rows`; 0 when a column is
/// entirely missing.
pub fn fill_values(table: &FeatureTable, rows: &[usize]) -> Vec<f64> {
    (0..table.dim())
        .map(|c| {
            let (sum, n) = rows
                .iter()
                .map(|&r| &table.rows[r])
                .filter(|v| !v.missing[c])
                .fold((0.0, 0usize), |(s, n), v| (s + v.values[c], n + 1));
            if n == 0 { 0.0 } else { sum / n as f64 }
        })
        .collect()
}

/// Rows of `table` as a matrix, missing cells replaced by `fill`.
pub fn design_matrix(table: &FeatureTable, rows: &[usize], fill: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), table.dim(), |i, c| {
        let v = &table.rows[rows[i]];
        if v.missing[c] { fill[c] } else { v.values[c] }
    })
}

/// Fits every row of `table` (mean-imputed) and names the components.
pub fn fit_document(table: &FeatureTable, config: &FitConfig, manual_labels: Option<&[String]>) -> Result<ModelDocument, EvalError> {
    if table.is_empty() {
        return Err(EvalError::InvalidArgument("feature table has no rows".into()));
    }
    let rows: Vec<usize> = (0..table.len()).collect();
    let fill = fill_values(table, &rows);
    let model = fit(&design_matrix(table, &rows, &fill), config)?;
    let labels = semantic_labels(&model, &table.names, manual_labels);
    Ok(ModelDocument {
        model,
        feature_names: table.names.clone(),
        fill_values: fill,
        fit_config: config.clone(),
        labels: Some(labels),
    })
}
