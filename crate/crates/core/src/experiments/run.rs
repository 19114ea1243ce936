use serde::{Deserialize, Serialize};

use super::spec::{Cell, Estimator, StudySpec};
use crate::design::power_given_events;
use crate::error::{Error, Result};
use crate::estimate::{known_trajectory_cox, naive_cox, two_stage_test};
use crate::sim::{simulate_replicate, Cohort, SimConfig};

/// Largest tolerated share of failed replicates in one cell.
pub const MAX_FAILURE_RATE: f64 = 0.05;

/// One estimator applied to one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOutcome {
    pub estimator: Estimator,
    /// Named estimates; the tested SNP coefficient comes first.
    pub estimates: Vec<(String, f64)>,
    /// Two-sided Wald p-value of the SNP coefficient.
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: u64,
    pub events: usize,
    pub fits: Vec<EstimatorOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub estimator: Estimator,
    pub alpha_level: f64,
    pub rejections: usize,
    pub empirical: f64,
    /// Closed-form power at the cell's mean event count.
    pub calculated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSummary {
    pub estimator: Estimator,
    pub coef: String,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    /// Overridden parameters identifying the cell, as `(column, value)`.
    pub parameters: Vec<(String, String)>,
    pub n_subjects: usize,
    pub maf: f64,
    /// Overall SNP effect of the generating model.
    pub theta: f64,
    pub completed: usize,
    pub failed: usize,
    pub d_bar: f64,
    pub power: Vec<PowerEstimate>,
    pub summaries: Vec<EstimateSummary>,
    /// Completed replicates in replicate order.
    pub replicates: Vec<ReplicateOutcome>,
}

impl CellResult {
    pub fn power_for(&self, estimator: Estimator, alpha_level: f64) -> Option<&PowerEstimate> {
        self.power
            .iter()
            .find(|p| p.estimator == estimator && p.alpha_level == alpha_level)
    }

    pub fn summary_for(&self, estimator: Estimator, coef: &str) -> Option<&EstimateSummary> {
        self.summaries
            .iter()
            .find(|s| s.estimator == estimator && s.coef == coef)
    }

    /// SNP-coefficient p-values of one estimator, in replicate order.
    pub fn p_values(&self, estimator: Estimator) -> Vec<f64> {
        self.replicates
            .iter()
            .filter_map(|r| r.fits.iter().find(|f| f.estimator == estimator))
            .map(|f| f.p_value)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub master_seed: u64,
    pub replicates_requested: usize,
    pub cells: Vec<CellResult>,
}

fn analyse(cohort: &Cohort, estimator: Estimator) -> Result<EstimatorOutcome> {
    let generating = cohort.trajectory.random_dim().saturating_sub(1);
    let (estimates, p_value) = match estimator.stage1_degree(generating) {
        Some(degree) => {
            let fit = two_stage_test(cohort, degree)?;
            if !(fit.full.converged && fit.reduced.converged) {
                return Err(Error::InsufficientData("stage-1 model did not converge".into()));
            }
            if !fit.cox.converged {
                return Err(Error::Stage {
                    stage: "stage2-cox",
                    source: Box::new(Error::InsufficientData("Cox fit did not converge".into())),
                });
            }
            let mut est: Vec<(String, f64)> = fit
                .cox
                .names
                .iter()
                .cloned()
                .zip(fit.cox.coefficients.iter().copied())
                .collect();
            est.push(("beta_g".into(), fit.beta_g()));
            (est, fit.p_value())
        }
        None => {
            let fit = match estimator {
                Estimator::Naive => naive_cox(cohort)?,
                _ => known_trajectory_cox(cohort)?,
            };
            if !fit.converged {
                return Err(Error::InsufficientData("Cox fit did not converge".into()));
            }
            let est = fit
                .names
                .iter()
                .cloned()
                .zip(fit.coefficients.iter().copied())
                .collect();
            (est, fit.p_values[0])
        }
    };
    Ok(EstimatorOutcome {
        estimator,
        estimates,
        p_value,
    })
}

/// Simulates replicate `replicate` and applies every estimator; any failure
/// drops the whole replicate.
pub fn run_replicate(sim: &SimConfig, estimators: &[Estimator], replicate: u64) -> Result<ReplicateOutcome> {
    let cohort = simulate_replicate(sim, replicate)?;
    let fits = estimators
        .iter()
        .map(|&e| analyse(&cohort, e))
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplicateOutcome {
        replicate,
        events: cohort.event_count(),
        fits,
    })
}

#[cfg(feature = "parallel")]
fn map_replicates<T: Send>(n: usize, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n as u64).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_replicates<T>(n: usize, f: impl Fn(u64) -> T) -> Vec<T> {
    (0..n as u64).map(f).collect()
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Runs every replicate of one cell and aggregates in replicate order, so
/// the result does not depend on the number of threads.
pub fn run_cell(cell: &Cell, replicates: usize, alpha_levels: &[f64], estimators: &[Estimator]) -> Result<CellResult> {
    let outcomes = map_replicates(replicates, |r| run_replicate(&cell.sim, estimators, r));
    let mut completed = Vec::with_capacity(replicates);
    let mut failed = 0;
    let mut first_failure = None;
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(o) => completed.push(o),
            Err(e) => {
                failed += 1;
                first_failure.get_or_insert_with(|| format!("replicate {r}: {e}"));
            }
        }
    }
    if failed as f64 > MAX_FAILURE_RATE * replicates as f64 || completed.is_empty() {
        return Err(Error::TooManyFailures {
            failed,
            total: replicates,
            first: first_failure.unwrap_or_default(),
        });
    }

    let n_done = completed.len() as f64;
    let d_bar = completed.iter().map(|r| r.events as f64).sum::<f64>() / n_done;
    let theta = cell.sim.overall_effect();
    let mut power = Vec::new();
    let mut summaries = Vec::new();
    for (k, &estimator) in estimators.iter().enumerate() {
        for &alpha_level in alpha_levels {
            let rejections = completed
                .iter()
                .filter(|r| r.fits[k].p_value <= alpha_level)
                .count();
            power.push(PowerEstimate {
                estimator,
                alpha_level,
                rejections,
                empirical: rejections as f64 / n_done,
                calculated: power_given_events(cell.sim.maf, alpha_level, theta, d_bar)?,
            });
        }
        for (j, (coef, _)) in completed[0].fits[k].estimates.iter().enumerate() {
            let values: Vec<f64> = completed.iter().map(|r| r.fits[k].estimates[j].1).collect();
            let (mean, sd) = mean_sd(&values);
            summaries.push(EstimateSummary {
                estimator,
                coef: coef.clone(),
                mean,
                sd,
            });
        }
    }

    Ok(CellResult {
        parameters: cell
            .overrides
            .parameters()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        n_subjects: cell.sim.n_subjects,
        maf: cell.sim.maf,
        theta,
        completed: completed.len(),
        failed,
        d_bar,
        power,
        summaries,
        replicates: completed,
    })
}

/// Runs all cells in order, reporting each as it finishes.
pub fn run_study_with(spec: &StudySpec, mut on_cell: impl FnMut(&CellResult)) -> Result<StudyResult> {
    spec.validate()?;
    let mut cells = Vec::new();
    for cell in spec.resolve_cells()? {
        let result = run_cell(&cell, spec.replicates, &spec.alpha_levels, &spec.estimators)?;
        on_cell(&result);
        cells.push(result);
    }
    Ok(StudyResult {
        master_seed: spec.sim.seed,
        replicates_requested: spec.replicates,
        cells,
    })
}

pub fn run_study(spec: &StudySpec) -> Result<StudyResult> {
    run_study_with(spec, |_| {})
}

/// Empirical and calculated power of the base configuration.
pub fn empirical_power(spec: &StudySpec) -> Result<CellResult> {
    let mut base = spec.clone();
    base.cells.clear();
    base.sweep = None;
    if base.estimators.is_empty() {
        base.estimators.push(Estimator::TwoStage);
    }
    run_study(&base).map(|mut r| r.cells.remove(0))
}

/// Mean event count of the base configuration; no model fitting.
pub fn mean_events(spec: &StudySpec) -> Result<f64> {
    let mut base = spec.clone();
    base.cells.clear();
    base.sweep = None;
    base.estimators.clear();
    run_study(&base).map(|r| r.cells[0].d_bar)
}

/// Naive, known-trajectory and two-stage estimates of the direct SNP effect
/// when the SNP does not act on the trajectory.
pub fn bias_study(spec: &StudySpec) -> Result<StudyResult> {
    let mut study = spec.clone();
    study.estimators = vec![Estimator::Naive, Estimator::KnownTrajectory, Estimator::TwoStage];
    for cell in study.resolve_cells()? {
        if cell.sim.trajectory.beta_g != 0.0 {
            return Err(Error::invalid("beta_g", "the bias study requires beta_g = 0"));
        }
    }
    run_study(&study)
}

/// Two-stage power with the correct quadratic and a misspecified linear
/// Stage-1 model.
pub fn misspecification_study(spec: &StudySpec) -> Result<StudyResult> {
    let mut study = spec.clone();
    study.estimators = vec![Estimator::TwoStageQuadratic, Estimator::TwoStageLinear];
    for cell in study.resolve_cells()? {
        if cell.sim.trajectory.degree() != 2 || cell.sim.trajectory.random_dim() != 3 {
            return Err(Error::invalid(
                "trajectory",
                "the misspecification study requires a quadratic trajectory with three random effects",
            ));
        }
    }
    run_study(&study)
}
