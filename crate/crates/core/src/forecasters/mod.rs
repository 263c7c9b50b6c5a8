//! Raw forecast producers feeding the recalibrator.

mod experts;
mod logistic;

pub use experts::ExpertAggregator;
pub use logistic::{LogisticForecaster, StepRule, CLAMP};
