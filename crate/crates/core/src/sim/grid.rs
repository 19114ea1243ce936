use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};

/// Named visit schedules over `[0, tau]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// Quarterly measurements, half-yearly assessments.
    S1,
    /// Half-yearly measurements, yearly assessments.
    S2,
    /// Yearly measurements, six equally spaced assessments.
    S3,
    /// Five equally spaced measurements and five assessments.
    S4,
    /// Five equally spaced measurements, three assessments.
    S5,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::S1,
        Scenario::S2,
        Scenario::S3,
        Scenario::S4,
        Scenario::S5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::S1 => "S1",
            Scenario::S2 => "S2",
            Scenario::S3 => "S3",
            Scenario::S4 => "S4",
            Scenario::S5 => "S5",
        }
    }

    pub fn grid(self, max_followup: f64) -> Result<TimeGrid> {
        check_positive("grid.max_followup", max_followup)?;
        let tau = max_followup;
        // Longitudinal schedules start at baseline; assessments start after it.
        let (longitudinal, survival) = match self {
            Scenario::S1 => (every(0.25, tau, true), every(0.5, tau, false)),
            Scenario::S2 => (every(0.5, tau, true), every(1.0, tau, false)),
            Scenario::S3 => (every(1.0, tau, true), evenly(6, tau, false)),
            Scenario::S4 => (evenly(5, tau, true), evenly(5, tau, false)),
            Scenario::S5 => (evenly(5, tau, true), evenly(3, tau, false)),
        };
        let mut grid = TimeGrid::new(longitudinal, survival, tau)?;
        grid.scenario = Some(self);
        Ok(grid)
    }
}

/// Multiples of `step` within `(0, tau]` (or `[0, tau]`), with `tau` appended
/// when it is not itself a multiple.
fn every(step: f64, tau: f64, include_zero: bool) -> Vec<f64> {
    let count = (tau / step + 1e-9).floor() as usize;
    let start = usize::from(!include_zero);
    let mut times: Vec<f64> = (start..=count).map(|k| k as f64 * step).collect();
    if times.last().map_or(true, |&t| tau - t > 1e-9) {
        times.push(tau);
    } else if let Some(last) = times.last_mut() {
        *last = tau;
    }
    times
}

/// `count` equally spaced points ending at `tau`; from 0 when `include_zero`.
fn evenly(count: usize, tau: f64, include_zero: bool) -> Vec<f64> {
    if include_zero {
        let div = (count - 1) as f64;
        (0..count).map(|k| tau * k as f64 / div).collect()
    } else {
        (1..=count).map(|k| tau * k as f64 / count as f64).collect()
    }
}

/// Visit times for longitudinal measurements and assessment times for the
/// event process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct TimeGrid {
    pub scenario: Option<Scenario>,
    pub longitudinal: Vec<f64>,
    pub survival: Vec<f64>,
    pub max_followup: f64,
}

impl TimeGrid {
    pub fn new(longitudinal: Vec<f64>, survival: Vec<f64>, max_followup: f64) -> Result<Self> {
        let grid = TimeGrid {
            scenario: None,
            longitudinal,
            survival,
            max_followup,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("grid.max_followup", self.max_followup)?;
        let tau = self.max_followup;
        for (field, times) in [
            ("grid.longitudinal_times", &self.longitudinal),
            ("grid.survival_times", &self.survival),
        ] {
            if times.is_empty() {
                return Err(Error::invalid(field, "must not be empty"));
            }
            if times.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::invalid(field, "must be strictly increasing"));
            }
            if times[0] < 0.0 || *times.last().unwrap() > tau {
                return Err(Error::invalid(field, format!("must lie within [0, {tau}]")));
            }
        }
        if self.survival[0] <= 0.0 {
            return Err(Error::invalid("grid.survival_times", "must be positive"));
        }
        if *self.survival.last().unwrap() != tau {
            return Err(Error::invalid(
                "grid.survival_times",
                format!("last assessment must equal max_followup {tau}"),
            ));
        }
        Ok(())
    }

    /// Same schedule type at a different follow-up.
    pub fn with_followup(&self, max_followup: f64) -> Result<Self> {
        match self.scenario {
            Some(s) => s.grid(max_followup),
            None => {
                let scale = max_followup / self.max_followup;
                let rescale = |v: &[f64]| v.iter().map(|t| t * scale).collect::<Vec<_>>();
                let mut survival = rescale(&self.survival);
                if let Some(last) = survival.last_mut() {
                    *last = max_followup;
                }
                TimeGrid::new(rescale(&self.longitudinal), survival, max_followup)
            }
        }
    }

    /// Survival-grid interval `(lower, upper]` containing `t`, or `None` when `t`
    /// lies beyond the last assessment.
    pub fn bracket(&self, t: f64) -> Option<(f64, f64)> {
        let idx = self.survival.partition_point(|&g| g < t);
        let upper = *self.survival.get(idx)?;
        let lower = if idx == 0 { 0.0 } else { self.survival[idx - 1] };
        Some((lower, upper))
    }

    /// Interval starts `0, s_1, ..., s_{k-1}` for all assessment intervals ending at or before `upper`.
    pub fn intervals_through(&self, upper: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        std::iter::once(0.0)
            .chain(self.survival.iter().copied())
            .zip(self.survival.iter().copied())
            .take_while(move |&(_, stop)| stop <= upper)
    }
}

/// Serialized grid: either a named scenario or explicit time lists.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    pub max_followup: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub longitudinal_times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub survival_times: Option<Vec<f64>>,
}

impl TryFrom<GridSpec> for TimeGrid {
    type Error = Error;

    fn try_from(spec: GridSpec) -> Result<Self> {
        match (spec.scenario, spec.longitudinal_times, spec.survival_times) {
            (Some(s), None, None) => s.grid(spec.max_followup),
            (None, Some(l), Some(s)) => TimeGrid::new(l, s, spec.max_followup),
            _ => Err(Error::invalid(
                "grid",
                "give either `scenario` or both `longitudinal_times` and `survival_times`",
            )),
        }
    }
}

impl From<TimeGrid> for GridSpec {
    fn from(grid: TimeGrid) -> Self {
        match grid.scenario {
            Some(s) => GridSpec {
                scenario: Some(s),
                max_followup: grid.max_followup,
                longitudinal_times: None,
                survival_times: None,
            },
            None => GridSpec {
                scenario: None,
                max_followup: grid.max_followup,
                longitudinal_times: Some(grid.longitudinal),
                survival_times: Some(grid.survival),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_shapes() {
        let g = Scenario::S1.grid(10.0).unwrap();
        assert_eq!(g.longitudinal.len(), 41);
        assert_eq!(g.survival.len(), 20);
        assert_eq!(g.survival[0], 0.5);
        let g = Scenario::S2.grid(10.0).unwrap();
        assert_eq!((g.longitudinal.len(), g.survival.len()), (21, 10));
        let g = Scenario::S3.grid(10.0).unwrap();
        assert_eq!((g.longitudinal.len(), g.survival.len()), (11, 6));
        let g = Scenario::S4.grid(10.0).unwrap();
        assert_eq!(g.longitudinal, vec![0.0, 2.5, 5.0, 7.5, 10.0]);
        assert_eq!(g.survival, vec![2.0, 4.0, 6.0, 8.0, 10.0]);
        let g = Scenario::S5.grid(10.0).unwrap();
        assert_eq!(g.survival.len(), 3);
        assert_eq!(*g.survival.last().unwrap(), 10.0);
    }

    #[test]
    fn odd_followup_keeps_tau_last() {
        let g = Scenario::S1.grid(7.6).unwrap();
        assert_eq!(*g.survival.last().unwrap(), 7.6);
        assert_eq!(*g.longitudinal.last().unwrap(), 7.6);
        let g = Scenario::S1.grid(7.5).unwrap();
        assert_eq!(g.survival.len(), 15);
    }

    #[test]
    fn bracket_conventions() {
        let g = Scenario::S1.grid(10.0).unwrap();
        assert_eq!(g.bracket(3.2), Some((3.0, 3.5)));
        assert_eq!(g.bracket(4.0), Some((3.5, 4.0)));
        assert_eq!(g.bracket(0.1), Some((0.0, 0.5)));
        assert_eq!(g.bracket(0.0), Some((0.0, 0.5)));
        assert_eq!(g.bracket(11.0), None);
    }

    #[test]
    fn intervals_through_counts() {
        let g = Scenario::S1.grid(10.0).unwrap();
        let rows: Vec<_> = g.intervals_through(2.0).collect();
        assert_eq!(rows, vec![(0.0, 0.5), (0.5, 1.0), (1.0, 1.5), (1.5, 2.0)]);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(vec![0.0, 1.0], vec![1.0, 0.5], 1.0).is_err());
        assert!(TimeGrid::new(vec![0.0, 1.0], vec![0.5, 1.0], 2.0).is_err());
        assert!(TimeGrid::new(vec![0.0, 3.0], vec![1.0, 2.0], 2.0).is_err());
    }
}
