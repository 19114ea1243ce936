//! Delimited result tables.

use std::io::Write;

use super::curve::{CurveSeries, RetroPoint};
use super::run::StudyResult;
use crate::error::{Error, Result};

pub const STUDY_COLUMNS: &[&str] = &[
    "alpha_level",
    "reps",
    "d_bar",
    "power_empirical",
    "power_calculated",
    "estimator",
    "coef",
    "mean",
    "sd",
];

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Parameter columns in order of first appearance across cells.
fn parameter_columns<'a>(cells: impl Iterator<Item = &'a Vec<(String, String)>>) -> Vec<String> {
    let mut cols: Vec<String> = Vec::new();
    for params in cells {
        for (k, _) in params {
            if !cols.contains(k) {
                cols.push(k.clone());
            }
        }
    }
    cols
}

fn lookup(params: &[(String, String)], key: &str) -> String {
    params
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.clone())
        .unwrap_or_default()
}

/// One row per cell, estimator and significance level for the tested SNP
/// coefficient, then one row per further coefficient (power columns empty).
/// With no estimators each cell gets one row per level with the calculated power only.
pub fn write_study_table<W: Write>(out: W, result: &StudyResult) -> Result<()> {
    let params = parameter_columns(result.cells.iter().map(|c| &c.parameters));
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<&str> = params.iter().map(String::as_str).chain(STUDY_COLUMNS.iter().copied()).collect();
    w.write_record(&header).map_err(csv_error)?;
    for cell in &result.cells {
        let lead: Vec<String> = params.iter().map(|k| lookup(&cell.parameters, k)).collect();
        let mut row = |fields: [String; 9]| {
            let record: Vec<String> = lead.iter().cloned().chain(fields).collect();
            w.write_record(&record).map_err(csv_error)
        };
        let reps = cell.completed.to_string();
        let d_bar = num(cell.d_bar);
        let mut estimators: Vec<_> = cell.power.iter().map(|p| p.estimator).collect();
        estimators.dedup();
        for p in &cell.power {
            let coef = cell.summaries.iter().find(|s| s.estimator == p.estimator);
            row([
                num(p.alpha_level),
                reps.clone(),
                d_bar.clone(),
                num(p.empirical),
                num(p.calculated),
                p.estimator.name().into(),
                coef.map(|s| s.coef.clone()).unwrap_or_default(),
                coef.map(|s| num(s.mean)).unwrap_or_default(),
                coef.map(|s| num(s.sd)).unwrap_or_default(),
            ])?;
        }
        for e in estimators {
            for s in cell.summaries.iter().filter(|s| s.estimator == e).skip(1) {
                row([
                    String::new(),
                    reps.clone(),
                    d_bar.clone(),
                    String::new(),
                    String::new(),
                    e.name().into(),
                    s.coef.clone(),
                    num(s.mean),
                    num(s.sd),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Event-count-only study: calculated power for each significance level.
pub fn write_events_table<W: Write>(out: W, result: &StudyResult, alpha_levels: &[f64]) -> Result<()> {
    let params = parameter_columns(result.cells.iter().map(|c| &c.parameters));
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<&str> = params
        .iter()
        .map(String::as_str)
        .chain(["alpha_level", "reps", "d_bar", "power_calculated"])
        .collect();
    w.write_record(&header).map_err(csv_error)?;
    for cell in &result.cells {
        for &a in alpha_levels {
            let power = crate::design::power_given_events(cell.maf, a, cell.theta, cell.d_bar)?;
            let record: Vec<String> = params
                .iter()
                .map(|k| lookup(&cell.parameters, k))
                .chain([num(a), cell.completed.to_string(), num(cell.d_bar), num(power)])
                .collect();
            w.write_record(&record).map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_curve_table<W: Write>(out: W, series: &[CurveSeries]) -> Result<()> {
    let params = parameter_columns(series.iter().map(|s| &s.parameters));
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<&str> = params
        .iter()
        .map(String::as_str)
        .chain(["alpha_level", "n_subjects", "d_bar", "power_calculated"])
        .collect();
    w.write_record(&header).map_err(csv_error)?;
    for s in series {
        for p in &s.points {
            let record: Vec<String> = params
                .iter()
                .map(|k| lookup(&s.parameters, k))
                .chain([num(s.alpha_level), p.n_subjects.to_string(), num(p.d_bar), num(p.power)])
                .collect();
            w.write_record(&record).map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rows of `(events, point)`; all points share `theta`.
pub fn write_retro_table<W: Write>(out: W, theta: f64, rows: &[(f64, RetroPoint)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["events", "theta", "alpha_level", "maf", "power_calculated"])
        .map_err(csv_error)?;
    for (events, p) in rows {
        w.write_record([num(*events), num(theta), num(p.alpha_level), num(p.maf), num(p.power)])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}
