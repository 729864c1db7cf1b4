//! Task adapters and metrics: anomaly scoring with point-adjusted best F1,
//! classification precision/recall/F1, forecasting and imputation MSE/MAE,
//! classical imputation baselines, and PCA projection of embeddings.

pub mod anomaly;
pub mod evaluate;
pub mod imputation;
pub mod metrics;
pub mod pca;

pub use anomaly::{
    adjusted_best_f1, anomaly_score, f1_from_predictions, point_adjust, AnomalyScoreTrace,
};
pub use evaluate::{evaluate, score_trace, segment_missing_mask, EvalOptions, EvalReport};
pub use imputation::{baseline_impute, impute, BaselineKind};
pub use metrics::{mse_mae, mse_mae_masked, precision_recall_f1, Averaging};
pub use pca::pca_project;
