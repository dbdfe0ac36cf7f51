//! Utility metrics comparing synthetic tables with real ones: summary
//! statistics, marginal and mutual-information similarity, PCA with
//! Gaussian-mixture clustering, and logistic-regression classification.

mod classify;
mod cluster;
mod pca;
mod similarity;
mod stats;

pub use classify::{
    classification_scores, logistic_fit_eval, ClassificationScores, LOGISTIC_ITERATIONS,
    LOGISTIC_L2,
};
pub use cluster::{gmm_fit_silhouette, silhouette, Gmm, GMM_MAX_ITERATIONS, GMM_TOLERANCE};
pub use pca::{pca_top2, Pca};
pub use similarity::{marginal_similarity, mi_agreement, mi_similarity};
pub use stats::{pearson, stat_correlations, stat_mean};

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};

/// Where a metric value came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalContext {
    pub dataset: String,
    pub model: String,
    pub epsilon: f64,
    pub n: usize,
    pub d: usize,
    pub fit_index: usize,
    pub sample_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metric: String,
    pub value: f64,
    pub context: EvalContext,
}

impl EvalReport {
    pub fn new(metric: impl Into<String>, value: f64, context: EvalContext) -> Result<Self> {
        let metric = metric.into();
        if !value.is_finite() {
            return input(format!(
                "metric {metric} produced a non-finite value {value}"
            ));
        }
        if context.dataset.is_empty() || context.model.is_empty() {
            return input("evaluation context needs a dataset and a model");
        }
        Ok(Self {
            metric,
            value,
            context,
        })
    }
}
