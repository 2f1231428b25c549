//! Answer metrics, top-k retrieval metrics and experiment runs.

mod experiment;
mod grid;
mod judge;
mod metrics;
mod summary;

pub use experiment::{
    evaluate_bundle, run_experiment, run_grid, Aggregates, EvaluationReport, ExperimentConfig, ExperimentError,
    MetricRow,
};
pub use grid::{Grid, GridDefaults, GridRow};
pub use judge::{containment, ContainmentJudge, Judge, JudgeError, LlmJudge, DEFAULT_TAU};
pub use metrics::{
    answer_relevance, context_recall, f1, faithfulness, locate_reference, topk_metrics, topk_span_metrics,
    MetricError, TopKMode, TopKScores,
};
pub use summary::{overall_table, topk_table};
