//! Benchmark fixtures shared by the bench targets.

use episir::models::reference;
use episir::{model_series, IntegratorConfig, TimeSeriesTriple};

/// Noise-free 212-day series from the reference extended parameters.
pub fn reference_series() -> TimeSeriesTriple {
    let cfg = IntegratorConfig::rk45(1e-10, 1e-10);
    let [s, i, r] = model_series(&reference::extended(), &reference::KC_INITIAL, 212, &cfg)
        .expect("reference parameters integrate");
    let start = "2020-03-14".parse().expect("valid date");
    TimeSeriesTriple::from_start(start, s, i, r).expect("equal lengths")
}
