use serde::{Deserialize, Serialize};

use super::run::{run_study, StudyResult};
use super::spec::{StudySpec, SweepParameter};
use crate::design::power_given_events;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n_subjects: usize,
    pub d_bar: f64,
    pub power: f64,
}

/// Calculated power along the sample-size grid for one setting of the other
/// parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSeries {
    /// The non-sample-size parameters of the series, as `(column, value)`.
    pub parameters: Vec<(String, String)>,
    pub alpha_level: f64,
    pub points: Vec<CurvePoint>,
}

impl CurveSeries {
    pub fn label(&self) -> String {
        self.parameters
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Groups an event-count study swept over `n_subjects` into one series per
/// explicit cell and evaluates the closed-form power at each mean event count.
pub fn curve_from_study(result: &StudyResult, alpha_level: f64) -> Result<Vec<CurveSeries>> {
    let mut series: Vec<CurveSeries> = Vec::new();
    for cell in &result.cells {
        let parameters: Vec<(String, String)> = cell
            .parameters
            .iter()
            .filter(|(k, _)| k != "n_subjects")
            .cloned()
            .collect();
        let point = CurvePoint {
            n_subjects: cell.n_subjects,
            d_bar: cell.d_bar,
            power: power_given_events(cell.maf, alpha_level, cell.theta, cell.d_bar)?,
        };
        match series.last_mut() {
            Some(s) if s.parameters == parameters => s.points.push(point),
            _ => series.push(CurveSeries {
                parameters,
                alpha_level,
                points: vec![point],
            }),
        }
    }
    Ok(series)
}

/// Simulates mean event counts over the sample-size sweep of `spec` and
/// returns power-vs-n / power-vs-events series at each of its significance levels.
pub fn power_curve(spec: &StudySpec) -> Result<Vec<CurveSeries>> {
    match &spec.sweep {
        Some(s) if s.parameter == SweepParameter::NSubjects => {}
        _ => return Err(Error::invalid("sweep.parameter", "a power curve sweeps n_subjects")),
    }
    let mut events_only = spec.clone();
    events_only.estimators.clear();
    let result = run_study(&events_only)?;
    let mut out = Vec::new();
    for &alpha_level in &spec.alpha_levels {
        out.extend(curve_from_study(&result, alpha_level)?);
    }
    Ok(out)
}

/// Piecewise-linear interpolation of power against mean event count;
/// `None` outside the series' range.
pub fn interpolate_power(series: &CurveSeries, d: f64) -> Option<f64> {
    let pts = &series.points;
    let first = pts.first()?;
    let last = pts.last()?;
    if d < first.d_bar || d > last.d_bar {
        return None;
    }
    let i = pts.partition_point(|p| p.d_bar < d);
    if i == 0 {
        return Some(first.power);
    }
    let (a, b) = (&pts[i - 1], &pts[i]);
    let w = (d - a.d_bar) / (b.d_bar - a.d_bar);
    Some(a.power + w * (b.power - a.power))
}

/// Largest pointwise power difference between two power-vs-events curves,
/// comparing each point of either series with the other where they overlap.
pub fn max_series_gap(a: &CurveSeries, b: &CurveSeries) -> f64 {
    let one_way = |x: &CurveSeries, y: &CurveSeries| {
        x.points
            .iter()
            .filter_map(|p| interpolate_power(y, p.d_bar).map(|q| (p.power - q).abs()))
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetroPoint {
    pub alpha_level: f64,
    pub maf: f64,
    pub power: f64,
}

/// Closed-form power over a grid of allele frequencies and significance
/// levels for a fixed, already observed number of events.
pub fn retrospective_power(events: f64, theta: f64, mafs: &[f64], alpha_levels: &[f64]) -> Result<Vec<RetroPoint>> {
    if !(events.is_finite() && events > 0.0) {
        return Err(Error::invalid("events", format!("must be positive, got {events}")));
    }
    let mut out = Vec::with_capacity(mafs.len() * alpha_levels.len());
    for &alpha_level in alpha_levels {
        for &maf in mafs {
            out.push(RetroPoint {
                alpha_level,
                maf,
                power: power_given_events(maf, alpha_level, theta, events)?,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(points: &[(f64, f64)]) -> CurveSeries {
        CurveSeries {
            parameters: vec![],
            alpha_level: 0.05,
            points: points
                .iter()
                .map(|&(d_bar, power)| CurvePoint {
                    n_subjects: 0,
                    d_bar,
                    power,
                })
                .collect(),
        }
    }

    #[test]
    fn interpolation_and_gap() {
        let a = series(&[(0.0, 0.0), (10.0, 1.0)]);
        assert_eq!(interpolate_power(&a, 2.5), Some(0.25));
        assert_eq!(interpolate_power(&a, 11.0), None);
        let b = series(&[(5.0, 0.6)]);
        assert!((max_series_gap(&a, &b) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn retro_null_effect() {
        let pts = retrospective_power(315.0, 0.0, &[0.1, 0.3], &[0.05]).unwrap();
        assert!(pts.iter().all(|p| (p.power - 0.025).abs() < 1e-12));
        assert!(retrospective_power(0.0, 0.3, &[0.1], &[0.05]).is_err());
    }
}
