//! Stage-1 mixed models, Cox regression, and the two-stage pipeline.

pub mod counting;
pub mod cox;
pub mod lmm;
pub mod simplex;
pub mod two_stage;

pub use counting::{build_counting_process, CountingProcessData, CountingRow, CovariateSource};
pub use cox::{fit_cox, CoxFit};
pub use lmm::{adjust_responses, blup_trajectory, fit_lmm, fit_lmm_from, LmmFit};
pub use two_stage::{known_trajectory_cox, naive_cox, two_stage_test, TwoStageFit};
