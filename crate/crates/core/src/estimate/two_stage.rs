//! The two-stage test of the overall SNP effect and the two comparison Cox
//! fits (SNP only; SNP plus the true trajectory).

use super::counting::{build_counting_process, CovariateSource};
use super::cox::{fit_cox, CoxFit};
use super::lmm::{adjust_responses, fit_lmm, fit_lmm_from, LmmFit};
use crate::error::Result;
use crate::sim::Cohort;

pub const THETA_G: &str = "theta_g";
pub const ALPHA_PRIME: &str = "alpha_prime";
pub const GAMMA_G: &str = "gamma_g";
pub const ALPHA: &str = "alpha";

#[derive(Debug, Clone)]
pub struct TwoStageFit {
    /// Longitudinal model with the SNP as a fixed effect.
    pub full: LmmFit,
    /// SNP-free model fitted to the adjusted responses; its BLUPs feed stage 2.
    pub reduced: LmmFit,
    pub cox: CoxFit,
}

impl TwoStageFit {
    pub fn beta_g(&self) -> f64 {
        self.full.beta_g().unwrap_or(f64::NAN)
    }

    pub fn theta_g(&self) -> f64 {
        self.cox.coefficients[0]
    }

    pub fn p_value(&self) -> f64 {
        self.cox.p_values[0]
    }
}

/// Stage 1 estimates `beta_g`, removes it from the responses and predicts
/// each subject's SNP-free trajectory; stage 2 regresses the hazard on the
/// SNP and that predicted trajectory. The SNP coefficient then carries the
/// overall effect `gamma_g + alpha * beta_g`.
pub fn two_stage_test(cohort: &Cohort, degree: usize) -> Result<TwoStageFit> {
    let full = fit_lmm(cohort, degree, true).map_err(|e| e.at_stage("stage1-full"))?;
    let beta_g = full.beta_g().unwrap_or(0.0);
    let adjusted = adjust_responses(cohort, beta_g);
    let reduced =
        fit_lmm_from(&adjusted, degree, false, Some(&full)).map_err(|e| e.at_stage("stage1-reduced"))?;
    let cox = build_counting_process(cohort, CovariateSource::FittedBlup(&reduced))
        .and_then(|data| fit_cox(&data, &[THETA_G, ALPHA_PRIME]))
        .map_err(|e| e.at_stage("stage2-cox"))?;
    Ok(TwoStageFit { full, reduced, cox })
}

/// Cox model with the SNP as the only covariate.
pub fn naive_cox(cohort: &Cohort) -> Result<CoxFit> {
    let data = build_counting_process(cohort, CovariateSource::None)?;
    fit_cox(&data, &[GAMMA_G])
}

/// Cox model on the SNP and the generating SNP-free trajectory.
pub fn known_trajectory_cox(cohort: &Cohort) -> Result<CoxFit> {
    let data = build_counting_process(cohort, CovariateSource::TrueTrajectory)?;
    fit_cox(&data, &[GAMMA_G, ALPHA])
}
