//! Power and sample-size engine for the overall effect of a SNP on a
//! time-to-event outcome under a joint longitudinal-survival model.
//!
//! - [`design`]: closed-form event-count and power calculators.
//! - [`sim`]: cohort simulation on visit and assessment grids.
//! - [`estimate`]: mixed-model, Cox, and two-stage estimators.
//! - [`experiments`]: Monte Carlo studies and result tables.

pub mod config;
pub mod design;
pub mod error;
pub mod estimate;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod normal;
pub mod sim;

pub use design::{
    detectable_effect, genotype_variance, overall_effect, power_given_events, required_events,
    solve_required_maf, EffectParameters, GeneticDesign,
};
pub use error::{Error, Result};
pub use model::{ErrorScale, HazardModel, TrajectoryModel};
