//! Splitting strategies, rank AUC, weighted F1 under the top-fraction
//! threshold rule, and the tau sweep report.

mod metrics;
mod report;
mod split;

pub use metrics::{auc, flag_count, threshold_at, weighted_f1, ConfusionCounts, Threshold};
pub use report::{default_tau_grid, parse_tau_grid, sweep, EvalReport, SweepRow};
pub use split::{seventy_percent, split, Split, SplitMeta, SplitSpec, SplitStrategy, MIN_SPLIT_ROWS};
