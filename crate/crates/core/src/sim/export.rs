//! Delimited export of simulated cohorts.
//!
//! `longitudinal.csv` has one row per (subject, measurement); `survival.csv`
//! one row per subject with the recorded analysis time `t_U`, the event flag
//! (0/1), and the assessment interval. Administratively censored subjects
//! carry `t_L = t_U = max_followup`.

use std::io::{self, Write};

use super::Cohort;

pub const LONGITUDINAL_COLUMNS: [&str; 4] = ["id", "snp", "time", "value"];
pub const SURVIVAL_COLUMNS: [&str; 6] = ["id", "snp", "t_event_recorded", "event", "t_L", "t_U"];

pub fn write_longitudinal<W: Write>(mut out: W, cohort: &Cohort) -> io::Result<()> {
    writeln!(out, "{}", LONGITUDINAL_COLUMNS.join(","))?;
    for s in &cohort.subjects {
        for m in &s.measurements {
            writeln!(out, "{},{},{},{}", s.id, s.snp, m.time, m.value)?;
        }
    }
    Ok(())
}

pub fn write_survival<W: Write>(mut out: W, cohort: &Cohort) -> io::Result<()> {
    writeln!(out, "{}", SURVIVAL_COLUMNS.join(","))?;
    let tau = cohort.grid.max_followup;
    for s in &cohort.subjects {
        let (lower, upper) = s.interval.unwrap_or((tau, tau));
        writeln!(
            out,
            "{},{},{},{},{},{}",
            s.id,
            s.snp,
            upper,
            u8::from(s.event),
            lower,
            upper
        )?;
    }
    Ok(())
}
