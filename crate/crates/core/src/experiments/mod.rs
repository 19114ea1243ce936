//! Monte Carlo studies: empirical versus calculated power, mean event
//! counts, estimator bias, Stage-1 misspecification, and power curves.
//!
//! Every replicate of every cell draws from the same per-replicate streams
//! of the master seed, so cells of a sweep share random numbers and results
//! are identical for any thread count.

mod curve;
mod run;
mod spec;
pub mod table;

pub use curve::{
    curve_from_study, interpolate_power, max_series_gap, power_curve, retrospective_power,
    CurvePoint, CurveSeries, RetroPoint,
};
pub use run::{
    bias_study, empirical_power, mean_events, misspecification_study, run_cell, run_replicate,
    run_study, run_study_with, CellResult, EstimateSummary, EstimatorOutcome, PowerEstimate,
    ReplicateOutcome, StudyResult, MAX_FAILURE_RATE,
};
pub use spec::{Cell, CellOverride, Estimator, StudySpec, Sweep, SweepParameter};
