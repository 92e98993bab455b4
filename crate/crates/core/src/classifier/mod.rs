//! Share prediction: CART decision trees, evaluation metrics, stratified
//! cross-validation and feature-group ablation.

mod cv;
mod metrics;
mod text;
mod tree;

pub use cv::{
    ablation, cross_validate, cross_validate_jobs, stratified_folds, write_report_csv, AblationRow,
    EvalReport, FeatureGroup, DEFAULT_FOLDS,
};
pub use metrics::{metrics, Confusion, EvalEntry, MetricMeans};
pub use text::{NON_SHARED, SHARED};
pub use tree::{predict, train_rows, train_tree, DecisionTree, Node, SplitCriterion, TreeParams};
