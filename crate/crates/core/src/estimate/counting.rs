//! Start-stop (counting process) rows for Cox fitting with a covariate that
//! changes between assessment times.

use crate::error::{Error, Result};
use crate::estimate::lmm::LmmFit;
use crate::sim::Cohort;

#[derive(Debug, Clone, PartialEq)]
pub struct CountingRow {
    pub subject: usize,
    pub start: f64,
    pub stop: f64,
    pub event: bool,
    pub covariates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountingProcessData {
    pub covariate_names: Vec<String>,
    pub rows: Vec<CountingRow>,
}

/// Where the time-dependent trajectory covariate comes from.
#[derive(Debug, Clone, Copy)]
pub enum CovariateSource<'a> {
    /// Fitted SNP-free trajectory (fixed effects plus BLUPs).
    FittedBlup(&'a LmmFit),
    /// Generating trajectory with the SNP shift removed.
    TrueTrajectory,
    /// Genotype only.
    None,
}

impl CountingProcessData {
    pub fn n_events(&self) -> usize {
        self.rows.iter().filter(|r| r.event).count()
    }

    /// Checks per-subject contiguity, `start < stop`, and that only the
    /// terminal row may carry an event.
    pub fn validate(&self) -> Result<()> {
        let width = self.covariate_names.len();
        let mut i = 0;
        while i < self.rows.len() {
            let subject = self.rows[i].subject;
            let mut j = i;
            while j < self.rows.len() && self.rows[j].subject == subject {
                let r = &self.rows[j];
                if !(r.start < r.stop) {
                    return Err(Error::invalid("rows", format!("subject {subject}: start must precede stop")));
                }
                if r.covariates.len() != width {
                    return Err(Error::invalid("rows", format!("subject {subject}: covariate width")));
                }
                if j > i && self.rows[j - 1].stop != r.start {
                    return Err(Error::invalid("rows", format!("subject {subject}: intervals not contiguous")));
                }
                j += 1;
            }
            if self.rows[i..j - 1].iter().any(|r| r.event) {
                return Err(Error::invalid("rows", format!("subject {subject}: event before terminal row")));
            }
            i = j;
        }
        Ok(())
    }
}

/// One row per assessment interval up to each subject's recorded time, with
/// the trajectory covariate evaluated at the interval start.
pub fn build_counting_process(cohort: &Cohort, source: CovariateSource<'_>) -> Result<CountingProcessData> {
    let covariate_names = match source {
        CovariateSource::None => vec!["snp".to_string()],
        _ => vec!["snp".to_string(), "trajectory".to_string()],
    };
    let mut rows = Vec::new();
    for s in &cohort.subjects {
        let upper = s.recorded_time(&cohort.grid);
        let snp = f64::from(s.snp);
        let intervals: Vec<(f64, f64)> = cohort.grid.intervals_through(upper).collect();
        let last = intervals.len();
        for (idx, (start, stop)) in intervals.into_iter().enumerate() {
            let mut covariates = vec![snp];
            match source {
                CovariateSource::FittedBlup(fit) => covariates.push(fit.subject_trajectory(s.id, start)?),
                CovariateSource::TrueTrajectory => covariates.push(
                    cohort.trajectory.value_without_snp(&s.random_effects, start),
                ),
                CovariateSource::None => {}
            }
            rows.push(CountingRow {
                subject: s.id,
                start,
                stop,
                event: s.event && idx + 1 == last,
                covariates,
            });
        }
    }
    Ok(CountingProcessData {
        covariate_names,
        rows,
    })
}
