//! Top-k metrics, signer-independent fold plans, test-set evaluation and
//! cross-run aggregation.

mod folds;
mod metrics;
mod predict;
mod report;

pub use folds::{signer_independent_folds, Fold, FoldPlan};
pub use metrics::{rank_of, top_k_accuracy};
pub use predict::{predict, stack_batch};
pub use report::{
    aggregate, evaluate, markdown_table, results_csv, CellResult, RunReport, Scores, Summary, RESULTS_HEADER,
};
