//! Fitting capacity, GOLD trend logs and score histograms.

mod capacity;
mod histogram;
mod trend;

pub use capacity::{
    accuracy, classifier, fitting_capacity, model_fitting_capacity, softmax_cross_entropy,
    EvalConfig, FittingCapacityReport, FixedSource, GeneratorSource, MixtureSource, SampleSource,
};
pub use histogram::{export_histogram, Bins, Histogram, HISTOGRAM_COLUMNS};
pub use trend::{log_trend, score_generated, TrendEntry, TrendLog, TREND_COLUMNS};
