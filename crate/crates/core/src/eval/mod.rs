//! Token-level scoring, revision histograms and timing.

mod latency;
mod score;

pub use latency::{bench, median_duration, position_change_histogram, Histogram, LatencyReport};
pub use score::{score, ClassScore, Counts, EvalReport};

#[cfg(test)]
mod tests;
