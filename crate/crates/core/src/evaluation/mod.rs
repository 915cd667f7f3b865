//! Accuracy, AUC, baseline tables and Shapley feature attribution.

mod metrics;
mod shap;

pub use metrics::{accuracy, auc, evaluate_baselines, write_baselines_csv, BaselineRow, MetricsRow, THRESHOLD};
pub use shap::{
    rank_features, shap_rank_table, shap_report, shapley_exact, shapley_sampled, write_shap_ranks_aa,
    write_shap_ranks_stage, FnModel, ShapMethod, ShapReport, ValueFunction, DEFAULT_PERMUTATIONS, MAX_EXACT_FEATURES,
};
