//! Cox proportional hazards fit on start-stop data by Newton-Raphson on the
//! Breslow log partial likelihood.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::counting::CountingProcessData;
use crate::error::{Error, Result};
use crate::linalg;
use crate::normal;

pub const MAX_ITERATIONS: usize = 50;
pub const MAX_HALVINGS: usize = 10;
pub const SCORE_TOLERANCE: f64 = 1e-9;
/// Relative slack when comparing log partial likelihoods across a step.
const LOGLIK_ROUNDING: f64 = 1e-12;
/// Coefficients beyond this magnitude are treated as diverging (monotone likelihood).
const DIVERGENCE_BOUND: f64 = 15.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub wald_z: Vec<f64>,
    pub p_values: Vec<f64>,
    pub converged: bool,
    pub n_events: usize,
    pub loglik: f64,
    /// Log partial likelihood after each accepted Newton step, starting at zero coefficients.
    pub loglik_trace: Vec<f64>,
    pub max_abs_score: f64,
}

impl CoxFit {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn estimate(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.coefficients[i])
    }

    pub fn p_value(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.p_values[i])
    }

    /// Flat `key=value` text record, one line per field.
    pub fn to_record(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "converged={}", self.converged);
        let _ = writeln!(out, "n_events={}", self.n_events);
        let _ = writeln!(out, "loglik={}", self.loglik);
        for i in 0..self.names.len() {
            let name = &self.names[i];
            let _ = writeln!(out, "{name}.estimate={}", self.coefficients[i]);
            let _ = writeln!(out, "{name}.se={}", self.std_errors[i]);
            let _ = writeln!(out, "{name}.z={}", self.wald_z[i]);
            let _ = writeln!(out, "{name}.p={}", self.p_values[i]);
        }
        out
    }

    /// Parses a record written by [`CoxFit::to_record`]. Iteration history is not stored.
    pub fn from_record(text: &str) -> Result<Self> {
        let bad = |line: &str| Error::invalid("record", format!("malformed line `{line}`"));
        let mut fit = CoxFit {
            names: vec![],
            coefficients: vec![],
            std_errors: vec![],
            wald_z: vec![],
            p_values: vec![],
            converged: false,
            n_events: 0,
            loglik: f64::NAN,
            loglik_trace: vec![],
            max_abs_score: f64::NAN,
        };
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (key, value) = line.split_once('=').ok_or_else(|| bad(line))?;
            match key {
                "converged" => fit.converged = value.parse().map_err(|_| bad(line))?,
                "n_events" => fit.n_events = value.parse().map_err(|_| bad(line))?,
                "loglik" => fit.loglik = value.parse().map_err(|_| bad(line))?,
                _ => {
                    let (name, field) = key.rsplit_once('.').ok_or_else(|| bad(line))?;
                    let v: f64 = value.parse().map_err(|_| bad(line))?;
                    let i = match fit.index(name) {
                        Some(i) => i,
                        None => {
                            fit.names.push(name.to_string());
                            fit.coefficients.push(f64::NAN);
                            fit.std_errors.push(f64::NAN);
                            fit.wald_z.push(f64::NAN);
                            fit.p_values.push(f64::NAN);
                            fit.names.len() - 1
                        }
                    };
                    match field {
                        "estimate" => fit.coefficients[i] = v,
                        "se" => fit.std_errors[i] = v,
                        "z" => fit.wald_z[i] = v,
                        "p" => fit.p_values[i] = v,
                        _ => return Err(bad(line)),
                    }
                }
            }
        }
        Ok(fit)
    }
}

/// Risk sets at each distinct event time, with rows in canonical order.
struct RiskSets {
    p: usize,
    /// Centered covariates, canonical row order, row-major.
    x: Vec<f64>,
    /// CSR offsets into `at_risk` per event time.
    offsets: Vec<usize>,
    at_risk: Vec<usize>,
    /// Rows with an event, grouped per event time.
    event_offsets: Vec<usize>,
    event_rows: Vec<usize>,
}

impl RiskSets {
    fn build(data: &CountingProcessData) -> Self {
        let p = data.covariate_names.len();
        let mut order: Vec<usize> = (0..data.rows.len()).collect();
        order.sort_by(|&a, &b| {
            let (ra, rb) = (&data.rows[a], &data.rows[b]);
            ra.subject
                .cmp(&rb.subject)
                .then(ra.start.total_cmp(&rb.start))
                .then(ra.stop.total_cmp(&rb.stop))
        });
        let rows: Vec<_> = order.iter().map(|&i| &data.rows[i]).collect();

        let mut means = vec![0.0; p];
        for r in &rows {
            for (m, v) in means.iter_mut().zip(&r.covariates) {
                *m += v;
            }
        }
        let n = rows.len().max(1) as f64;
        means.iter_mut().for_each(|m| *m /= n);
        let x: Vec<f64> = rows
            .iter()
            .flat_map(|r| r.covariates.iter().zip(&means).map(|(v, m)| v - m))
            .collect();

        let mut times: Vec<f64> = rows.iter().filter(|r| r.event).map(|r| r.stop).collect();
        times.sort_by(f64::total_cmp);
        times.dedup();

        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); times.len()];
        let mut event_buckets: Vec<Vec<usize>> = vec![Vec::new(); times.len()];
        for (i, r) in rows.iter().enumerate() {
            // event times in (start, stop]
            let first = times.partition_point(|&t| t <= r.start);
            let end = times.partition_point(|&t| t <= r.stop);
            for bucket in &mut buckets[first..end] {
                bucket.push(i);
            }
            if r.event {
                let k = times.partition_point(|&t| t < r.stop);
                event_buckets[k].push(i);
            }
        }
        let flatten = |b: Vec<Vec<usize>>| {
            let mut offsets = vec![0];
            let mut flat = Vec::new();
            for v in b {
                flat.extend(v);
                offsets.push(flat.len());
            }
            (offsets, flat)
        };
        let (offsets, at_risk) = flatten(buckets);
        let (event_offsets, event_rows) = flatten(event_buckets);
        RiskSets {
            p,
            x,
            offsets,
            at_risk,
            event_offsets,
            event_rows,
        }
    }

    fn n_times(&self) -> usize {
        self.offsets.len() - 1
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    /// Log partial likelihood, score, and observed information at `beta`.
    fn evaluate(&self, beta: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let p = self.p;
        let n_rows = self.x.len() / p.max(1);
        let eta: Vec<f64> = (0..n_rows)
            .map(|i| self.row(i).iter().zip(beta).map(|(x, b)| x * b).sum())
            .collect();
        let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = eta.iter().map(|e| (e - shift).exp()).collect();

        let mut loglik = 0.0;
        let mut score = vec![0.0; p];
        let mut info = vec![0.0; p * p];
        let mut s1 = vec![0.0; p];
        let mut s2 = vec![0.0; p * p];
        for k in 0..self.n_times() {
            let mut s0 = 0.0;
            s1.iter_mut().for_each(|v| *v = 0.0);
            s2.iter_mut().for_each(|v| *v = 0.0);
            for &i in &self.at_risk[self.offsets[k]..self.offsets[k + 1]] {
                let wi = w[i];
                let xi = self.row(i);
                s0 += wi;
                for a in 0..p {
                    s1[a] += wi * xi[a];
                    for b in 0..p {
                        s2[a * p + b] += wi * xi[a] * xi[b];
                    }
                }
            }
            let events = &self.event_rows[self.event_offsets[k]..self.event_offsets[k + 1]];
            let d = events.len() as f64;
            for &i in events {
                loglik += eta[i];
                for (s, x) in score.iter_mut().zip(self.row(i)) {
                    *s += x;
                }
            }
            loglik -= d * (s0.ln() + shift);
            for a in 0..p {
                let mean_a = s1[a] / s0;
                score[a] -= d * mean_a;
                for b in 0..p {
                    info[a * p + b] += d * (s2[a * p + b] / s0 - mean_a * s1[b] / s0);
                }
            }
        }
        (loglik, score, info)
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Newton-Raphson with step halving on the Breslow partial likelihood.
///
/// `names` labels the coefficients in covariate order. A fit whose score
/// does not reach 1e-9 within 50 iterations, or whose coefficients diverge,
/// is returned with `converged = false`.
pub fn fit_cox(data: &CountingProcessData, names: &[&str]) -> Result<CoxFit> {
    let p = data.covariate_names.len();
    if names.len() != p {
        return Err(Error::invalid(
            "coef_names",
            format!("expected {p} names, got {}", names.len()),
        ));
    }
    let n_events = data.n_events();
    if n_events == 0 {
        return Err(Error::NoEvents);
    }
    let sets = RiskSets::build(data);

    let mut beta = vec![0.0; p];
    let (mut loglik, mut score, mut info) = sets.evaluate(&beta);
    if linalg::cholesky(&info, p).is_err() {
        return Err(Error::Collinear);
    }
    let mut trace = vec![loglik];
    let mut converged = false;
    let mut diverged = false;
    for _ in 0..MAX_ITERATIONS {
        if max_abs(&score) < SCORE_TOLERANCE {
            converged = true;
            break;
        }
        let Ok(chol) = linalg::cholesky(&info, p) else {
            break;
        };
        let step = linalg::cholesky_solve(&chol, p, &score);
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let eval = sets.evaluate(&candidate);
            // Near the optimum the gain is below rounding in the loglik itself.
            if eval.0 >= loglik - LOGLIK_ROUNDING * loglik.abs() {
                accepted = Some((candidate, eval));
                break;
            }
            scale *= 0.5;
        }
        let Some((candidate, (ll, sc, inf))) = accepted else {
            break;
        };
        beta = candidate;
        loglik = ll;
        score = sc;
        info = inf;
        trace.push(loglik);
        if max_abs(&beta) > DIVERGENCE_BOUND {
            diverged = true;
            break;
        }
    }
    if !converged && !diverged && max_abs(&score) < SCORE_TOLERANCE {
        converged = true;
    }

    let (std_errors, wald_z, p_values) = match linalg::cholesky(&info, p) {
        Ok(chol) => {
            let cov = linalg::cholesky_inverse(&chol, p);
            let se: Vec<f64> = (0..p).map(|i| cov[i * p + i].sqrt()).collect();
            let z: Vec<f64> = beta.iter().zip(&se).map(|(b, s)| b / s).collect();
            let pv = z.iter().map(|&z| normal::two_sided_p(z)).collect();
            (se, z, pv)
        }
        Err(_) => {
            converged = false;
            (vec![f64::NAN; p], vec![f64::NAN; p], vec![f64::NAN; p])
        }
    };

    Ok(CoxFit {
        names: names.iter().map(|s| s.to_string()).collect(),
        coefficients: beta,
        std_errors,
        wald_z,
        p_values,
        converged,
        n_events,
        loglik,
        loglik_trace: trace,
        max_abs_score: max_abs(&score),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::counting::CountingRow;

    fn single_rows(times: &[(f64, bool, f64)]) -> CountingProcessData {
        CountingProcessData {
            covariate_names: vec!["x".into()],
            rows: times
                .iter()
                .enumerate()
                .map(|(i, &(t, e, x))| CountingRow {
                    subject: i,
                    start: 0.0,
                    stop: t,
                    event: e,
                    covariates: vec![x],
                })
                .collect(),
        }
    }

    #[test]
    fn two_subject_closed_form() {
        // Events at t=1 (x=1) and t=2 (x=0): the first risk set is both
        // subjects, the second only the x=0 subject, which contributes nothing.
        // l(b) = b - ln(e^b + 1) has no finite maximum, so add a third subject.
        let data = single_rows(&[(1.0, true, 1.0), (2.0, true, 0.0), (3.0, true, 1.0)]);
        // l(b) = b - ln(2e^b + 1) + 0 - ln(e^b + 1) + b - b
        // score: 1 - 2e^b/(2e^b+1) - e^b/(e^b+1) = 0  ->  e^b = 1/sqrt(2)
        let fit = fit_cox(&data, &["x"]).unwrap();
        assert!(fit.converged);
        let want = (0.5f64.sqrt()).ln();
        assert!((fit.coefficients[0] - want).abs() < 1e-10, "{}", fit.coefficients[0]);
    }

    #[test]
    fn no_events_is_an_error() {
        let data = single_rows(&[(1.0, false, 1.0), (2.0, false, 0.0)]);
        assert!(matches!(fit_cox(&data, &["x"]), Err(Error::NoEvents)));
    }

    #[test]
    fn constant_covariate_is_collinear() {
        let data = single_rows(&[(1.0, true, 1.0), (2.0, true, 1.0), (3.0, false, 1.0)]);
        assert!(matches!(fit_cox(&data, &["x"]), Err(Error::Collinear)));
    }

    #[test]
    fn perfect_separation_is_flagged() {
        // the x=1 subject always fails first: the likelihood is monotone in b
        let data = single_rows(&[(1.0, true, 1.0), (2.0, true, 0.0), (3.0, false, 0.0)]);
        let fit = fit_cox(&data, &["x"]).unwrap();
        assert!(!fit.converged);
    }

    #[test]
    fn record_round_trip() {
        let data = single_rows(&[(1.0, true, 1.0), (2.0, true, 0.0), (3.0, true, 1.0)]);
        let fit = fit_cox(&data, &["x"]).unwrap();
        let back = CoxFit::from_record(&fit.to_record()).unwrap();
        assert_eq!(back.names, fit.names);
        assert_eq!(back.coefficients, fit.coefficients);
        assert_eq!(back.p_values, fit.p_values);
        assert_eq!(back.converged, fit.converged);
        assert!(CoxFit::from_record("x.bogus=1").is_err());
    }
}
