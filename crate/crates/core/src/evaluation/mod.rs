//! Metrics and the evaluation plugin.
//!
//! Standalone metrics follow a reset/update/result protocol and can be used
//! on their own. Plugin metrics wrap them and emit [`MetricValue`]s at fixed
//! points of the loops; the [`EvaluationPlugin`] collects every emission and
//! forwards it to the registered loggers.

mod evaluator;
mod plugin_metrics;
mod standalone;
mod value;

pub use evaluator::{EvaluationPlugin, ResultsDict};
pub use plugin_metrics::{
    default_metrics, metric_by_id, ConfusionMatrixMetric, ForgettingMetric, Granularity, MacMetric,
    PluginMetric, ScalarMetric, TimingMetric, METRIC_IDS,
};
pub use standalone::{
    mac_metric, Accuracy, ConfusionMatrix, Forgetting, LossMetric, Metric, Timing,
};
pub use value::{metric_name, MetricData, MetricValue};
