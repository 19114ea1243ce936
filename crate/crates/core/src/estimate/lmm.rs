//! Maximum-likelihood linear mixed model with polynomial fixed and random
//! time effects.
//!
//! For subject `i` with `m_i` measurements,
//! `y_i = X_i beta + Z_i b_i + e_i`, `b_i ~ N(0, sigma^2 L L')`, `e_i ~ N(0, sigma^2 I)`.
//! Given the relative Cholesky factor `L`, both `beta` and `sigma^2` have
//! closed forms, so only the entries of `L` (log diagonal, raw off-diagonal)
//! are searched, with Nelder-Mead.
//!
//! Subjects measured at the same visit times share `Z_i`, hence share
//! `M = I + L' Z'Z L`. The likelihood pieces are accumulated per such group
//! from per-subject cross products `Z'X_i`, `Z'y_i`, so one likelihood
//! evaluation costs O(groups) rather than O(subjects).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::simplex::nelder_mead;
use crate::error::{Error, Result};
use crate::linalg;
use crate::sim::Cohort;

const MAX_RESTARTS: usize = 10;
const ITERATIONS_PER_PARAMETER: usize = 500;
const LOGLIK_REL_TOL: f64 = 1e-8;
/// Relative spread of simplex values at which one Nelder-Mead run stops.
const SIMPLEX_FTOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmmFit {
    pub degree: usize,
    pub include_snp: bool,
    /// `beta_0..beta_q`, then `beta_g` when the SNP is included.
    pub fixed_effects: Vec<f64>,
    pub fixed_se: Vec<f64>,
    /// Row-major `(q+1) x (q+1)` random-effect covariance estimate.
    pub random_cov: Vec<f64>,
    pub error_var: f64,
    /// Random-effect predictions indexed by subject id.
    pub blups: BTreeMap<usize, Vec<f64>>,
    pub converged: bool,
    pub loglik: f64,
    pub iterations: usize,
}

impl LmmFit {
    pub fn random_dim(&self) -> usize {
        self.degree + 1
    }

    pub fn beta_g(&self) -> Option<f64> {
        self.include_snp.then(|| self.fixed_effects[self.degree + 1])
    }

    pub fn beta_g_se(&self) -> Option<f64> {
        self.include_snp.then(|| self.fixed_se[self.degree + 1])
    }

    /// Population polynomial plus the subject's predicted random effects,
    /// without any SNP term.
    pub fn subject_trajectory(&self, subject: usize, t: f64) -> Result<f64> {
        let b = self.blups.get(&subject).ok_or(Error::UnknownSubject(subject))?;
        let mut power = 1.0;
        let mut eta = 0.0;
        for j in 0..=self.degree {
            eta += (self.fixed_effects[j] + b[j]) * power;
            power *= t;
        }
        Ok(eta)
    }
}

struct SubjectTerms {
    id: usize,
    group: usize,
    /// `Z_i' X_i`, k x p row-major.
    zx: Vec<f64>,
    /// `Z_i' y_i`.
    zy: Vec<f64>,
}

struct Group {
    count: f64,
    zz: Vec<f64>,
    /// `sum_i (Z'X_i)[a,:]' (Z'X_i)[b,:]`, indexed `[(a*k + b)*p*p + r*p + c]`.
    txx: Vec<f64>,
    /// `sum_i (Z'X_i)[a,:]' (Z'y_i)[b]`, indexed `[(a*k + b)*p + r]`.
    txy: Vec<f64>,
    /// `sum_i (Z'y_i)[a] (Z'y_i)[b]`.
    tyy: Vec<f64>,
}

struct Problem {
    k: usize,
    p: usize,
    n_obs: f64,
    xx: Vec<f64>,
    xy: Vec<f64>,
    yy: f64,
    groups: Vec<Group>,
    subjects: Vec<SubjectTerms>,
    all_ids: Vec<usize>,
}

struct Evaluation {
    loglik: f64,
    beta: Vec<f64>,
    sigma2: f64,
    xwx_chol: Vec<f64>,
    /// `L M^{-1} L'` per group.
    shrink: Vec<Vec<f64>>,
}

fn powers(t: f64, n: usize) -> impl Iterator<Item = f64> {
    std::iter::successors(Some(1.0), move |v| Some(v * t)).take(n)
}

impl Problem {
    fn build(cohort: &Cohort, degree: usize, include_snp: bool) -> Result<Self> {
        let k = degree + 1;
        let p = k + usize::from(include_snp);
        let mut xx = vec![0.0; p * p];
        let mut xy = vec![0.0; p];
        let mut yy = 0.0;
        let mut n_obs = 0usize;
        let mut group_index: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
        let mut groups: Vec<Group> = Vec::new();
        let mut subjects = Vec::new();
        let mut rich_subjects = 0;

        for s in &cohort.subjects {
            if s.measurements.is_empty() {
                continue;
            }
            if s.measurements.len() >= 3 {
                rich_subjects += 1;
            }
            let snp = f64::from(s.snp);
            let mut zx = vec![0.0; k * p];
            let mut zy = vec![0.0; k];
            let mut zz = vec![0.0; k * k];
            for m in &s.measurements {
                let z: Vec<f64> = powers(m.time, k).collect();
                let mut x = z.clone();
                if include_snp {
                    x.push(snp);
                }
                for a in 0..k {
                    zy[a] += z[a] * m.value;
                    for c in 0..p {
                        zx[a * p + c] += z[a] * x[c];
                    }
                    for b in 0..k {
                        zz[a * k + b] += z[a] * z[b];
                    }
                }
                for r in 0..p {
                    xy[r] += x[r] * m.value;
                    for c in 0..p {
                        xx[r * p + c] += x[r] * x[c];
                    }
                }
                yy += m.value * m.value;
                n_obs += 1;
            }

            let key: Vec<u64> = s.measurements.iter().map(|m| m.time.to_bits()).collect();
            let next = groups.len();
            let g = *group_index.entry(key).or_insert(next);
            if g == groups.len() {
                groups.push(Group {
                    count: 0.0,
                    zz,
                    txx: vec![0.0; k * k * p * p],
                    txy: vec![0.0; k * k * p],
                    tyy: vec![0.0; k * k],
                });
            }
            let group = &mut groups[g];
            group.count += 1.0;
            for a in 0..k {
                for b in 0..k {
                    let ab = a * k + b;
                    group.tyy[ab] += zy[a] * zy[b];
                    for r in 0..p {
                        group.txy[ab * p + r] += zx[a * p + r] * zy[b];
                        for c in 0..p {
                            group.txx[(ab * p + r) * p + c] += zx[a * p + r] * zx[b * p + c];
                        }
                    }
                }
            }
            subjects.push(SubjectTerms {
                id: s.id,
                group: g,
                zx,
                zy,
            });
        }

        if rich_subjects == 0 {
            return Err(Error::InsufficientData(
                "no subject has at least 3 measurements".into(),
            ));
        }
        if n_obs <= p {
            return Err(Error::InsufficientData(format!(
                "{n_obs} measurements for {p} fixed effects"
            )));
        }
        linalg::cholesky(&xx, p).map_err(|_| Error::SingularDesign)?;

        Ok(Problem {
            k,
            p,
            n_obs: n_obs as f64,
            xx,
            xy,
            yy,
            groups,
            subjects,
            all_ids: cohort.subjects.iter().map(|s| s.id).collect(),
        })
    }

    fn n_params(&self) -> usize {
        self.k * (self.k + 1) / 2
    }

    fn factor(&self, theta: &[f64]) -> Vec<f64> {
        let k = self.k;
        let mut l = vec![0.0; k * k];
        let mut idx = 0;
        for i in 0..k {
            for j in 0..=i {
                l[i * k + j] = if i == j { theta[idx].exp() } else { theta[idx] };
                idx += 1;
            }
        }
        l
    }

    fn evaluate(&self, theta: &[f64]) -> Option<Evaluation> {
        let (k, p) = (self.k, self.p);
        let l = self.factor(theta);
        let lt = linalg::transpose(&l, k, k);
        let mut xwx = self.xx.clone();
        let mut xwy = self.xy.clone();
        let mut ywy = self.yy;
        let mut logdet_sum = 0.0;
        let mut shrink = Vec::with_capacity(self.groups.len());

        for g in &self.groups {
            let mut m = linalg::matmul(&linalg::matmul(&lt, &g.zz, k, k, k), &l, k, k, k);
            for i in 0..k {
                m[i * k + i] += 1.0;
            }
            let mc = linalg::cholesky(&m, k).ok()?;
            logdet_sum += g.count * linalg::cholesky_logdet(&mc, k);
            let minv = linalg::cholesky_inverse(&mc, k);
            let a = linalg::matmul(&linalg::matmul(&l, &minv, k, k, k), &lt, k, k, k);
            for ab in 0..k * k {
                let w = a[ab];
                ywy -= w * g.tyy[ab];
                for r in 0..p {
                    xwy[r] -= w * g.txy[ab * p + r];
                    for c in 0..p {
                        xwx[r * p + c] -= w * g.txx[(ab * p + r) * p + c];
                    }
                }
            }
            shrink.push(a);
        }

        let xwx_chol = linalg::cholesky(&xwx, p).ok()?;
        let beta = linalg::cholesky_solve(&xwx_chol, p, &xwy);
        let rss = ywy - beta.iter().zip(&xwy).map(|(b, v)| b * v).sum::<f64>();
        let sigma2 = (rss / self.n_obs).max(f64::MIN_POSITIVE);
        let loglik = -0.5 * self.n_obs * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0)
            - 0.5 * logdet_sum;
        Some(Evaluation {
            loglik,
            beta,
            sigma2,
            xwx_chol,
            shrink,
        })
    }

    fn objective(&self, theta: &[f64]) -> f64 {
        self.evaluate(theta).map_or(f64::INFINITY, |e| -e.loglik)
    }
}

/// Maximum-likelihood fit of a degree-`degree` polynomial mixed model with
/// random coefficients for every polynomial term, optionally adding the SNP
/// as a fixed effect.
pub fn fit_lmm(cohort: &Cohort, degree: usize, include_snp: bool) -> Result<LmmFit> {
    fit_lmm_from(cohort, degree, include_snp, None)
}

/// As [`fit_lmm`], starting the variance-component search from a previous
/// fit of the same degree.
pub fn fit_lmm_from(
    cohort: &Cohort,
    degree: usize,
    include_snp: bool,
    start: Option<&LmmFit>,
) -> Result<LmmFit> {
    if !(1..=2).contains(&degree) {
        return Err(Error::invalid("degree", format!("must be 1 or 2, got {degree}")));
    }
    let problem = Problem::build(cohort, degree, include_snp)?;
    let k = problem.k;

    let mut theta = match start {
        Some(prev) if prev.degree == degree => start_from_fit(prev, k),
        _ => default_start(k),
    };
    let max_iter = ITERATIONS_PER_PARAMETER * problem.n_params();
    let mut value = problem.objective(&theta);
    let mut iterations = 0;
    let mut converged = false;
    let mut step = 0.5;
    for _ in 0..MAX_RESTARTS {
        let run = nelder_mead(|x| problem.objective(x), &theta, step, max_iter, SIMPLEX_FTOL);
        iterations += run.iterations;
        let change = (value - run.value).abs() / run.value.abs().max(1.0);
        theta = run.x;
        value = run.value;
        if run.converged && change < LOGLIK_REL_TOL {
            converged = true;
            break;
        }
        step = 0.1;
    }

    let eval = problem.evaluate(&theta).ok_or(Error::SingularDesign)?;
    Ok(assemble(&problem, &theta, eval, degree, include_snp, converged, iterations))
}

fn default_start(k: usize) -> Vec<f64> {
    // relative SDs 1, 0.3, 0.1 for intercept, slope, curvature
    let diag = [0.0, (0.3f64).ln(), (0.1f64).ln()];
    let mut theta = Vec::new();
    for i in 0..k {
        for j in 0..=i {
            theta.push(if i == j { diag[i] } else { 0.0 });
        }
    }
    theta
}

fn start_from_fit(prev: &LmmFit, k: usize) -> Vec<f64> {
    let rel: Vec<f64> = prev
        .random_cov
        .iter()
        .map(|v| v / prev.error_var.max(f64::MIN_POSITIVE))
        .collect();
    match linalg::cholesky(&rel, k) {
        Ok(l) => {
            let mut theta = Vec::new();
            for i in 0..k {
                for j in 0..=i {
                    let v = l[i * k + j];
                    theta.push(if i == j { v.ln() } else { v });
                }
            }
            theta
        }
        Err(_) => default_start(k),
    }
}

fn assemble(
    problem: &Problem,
    theta: &[f64],
    eval: Evaluation,
    degree: usize,
    include_snp: bool,
    converged: bool,
    iterations: usize,
) -> LmmFit {
    let (k, p) = (problem.k, problem.p);
    let l = problem.factor(theta);
    let d = linalg::matmul(&l, &linalg::transpose(&l, k, k), k, k, k);
    let random_cov = d.iter().map(|v| v * eval.sigma2).collect();

    let cov_beta = linalg::cholesky_inverse(&eval.xwx_chol, p);
    let fixed_se = (0..p)
        .map(|i| (eval.sigma2 * cov_beta[i * p + i]).sqrt())
        .collect();

    let mut blups: BTreeMap<usize, Vec<f64>> =
        problem.all_ids.iter().map(|&id| (id, vec![0.0; k])).collect();
    for s in &problem.subjects {
        let resid: Vec<f64> = (0..k)
            .map(|a| {
                s.zy[a]
                    - (0..p)
                        .map(|c| s.zx[a * p + c] * eval.beta[c])
                        .sum::<f64>()
            })
            .collect();
        let a = &eval.shrink[s.group];
        let b: Vec<f64> = (0..k)
            .map(|i| (0..k).map(|j| a[i * k + j] * resid[j]).sum())
            .collect();
        blups.insert(s.id, b);
    }

    LmmFit {
        degree,
        include_snp,
        fixed_effects: eval.beta,
        fixed_se,
        random_cov,
        error_var: eval.sigma2,
        blups,
        converged,
        loglik: eval.loglik,
        iterations,
    }
}

/// Subtracts `beta_g * snp` from every measurement; survival data untouched.
pub fn adjust_responses(cohort: &Cohort, beta_g: f64) -> Cohort {
    let mut adjusted = cohort.clone();
    for s in &mut adjusted.subjects {
        let shift = beta_g * f64::from(s.snp);
        for m in &mut s.measurements {
            m.value -= shift;
        }
    }
    adjusted
}

/// SNP-free fitted trajectory of `subject` at `t`.
pub fn blup_trajectory(fit: &LmmFit, subject: usize, t: f64) -> Result<f64> {
    fit.subject_trajectory(subject, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ErrorScale, TrajectoryModel};
    use crate::sim::{Measurement, Scenario, SubjectRecord};

    fn cohort_from(values: impl Fn(usize, f64) -> f64, n: usize) -> Cohort {
        let grid = Scenario::S2.grid(5.0).unwrap();
        let subjects = (0..n)
            .map(|id| SubjectRecord {
                id,
                snp: (id % 3) as u8,
                random_effects: vec![],
                measurements: grid
                    .longitudinal
                    .iter()
                    .map(|&time| Measurement {
                        time,
                        value: values(id, time),
                    })
                    .collect(),
                latent_time: None,
                censor_time: 5.0,
                observed_time: 5.0,
                event: false,
                interval: Some((4.0, 5.0)),
            })
            .collect();
        Cohort {
            subjects,
            grid,
            trajectory: TrajectoryModel {
                fixed: vec![0.0],
                beta_g: 0.0,
                random_cov: vec![vec![1.0]],
                error_var: 1.0,
                error_scale: ErrorScale::Variance,
            },
        }
    }

    #[test]
    fn exact_polynomial_recovery() {
        let cohort = cohort_from(|id, t| 8.5 + 0.1 * t + 0.3 * (id % 3) as f64, 30);
        let fit = fit_lmm(&cohort, 1, true).unwrap();
        let want = [8.5, 0.1, 0.3];
        for (got, want) in fit.fixed_effects.iter().zip(want) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
        for s in &cohort.subjects {
            for m in &s.measurements {
                let fitted = fit.subject_trajectory(s.id, m.time).unwrap()
                    + fit.beta_g().unwrap() * f64::from(s.snp);
                assert!((fitted - m.value).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn adjust_responses_shifts_by_genotype() {
        let cohort = cohort_from(|_, t| 1.0 + t, 6);
        let adjusted = adjust_responses(&cohort, 0.3);
        for (a, s) in adjusted.subjects.iter().zip(&cohort.subjects) {
            for (ma, ms) in a.measurements.iter().zip(&s.measurements) {
                let want = ms.value - 0.3 * f64::from(s.snp);
                assert!((ma.value - want).abs() < 1e-15);
            }
        }
        assert_eq!(adjust_responses(&cohort, 0.0), cohort);
    }

    #[test]
    fn unknown_subject() {
        let cohort = cohort_from(|id, t| id as f64 + t, 10);
        let fit = fit_lmm(&cohort, 1, false).unwrap();
        assert!(matches!(
            blup_trajectory(&fit, 99, 1.0),
            Err(Error::UnknownSubject(99))
        ));
    }

    #[test]
    fn rejects_thin_data_and_bad_degree() {
        let mut cohort = cohort_from(|_, t| t, 5);
        for s in &mut cohort.subjects {
            s.measurements.truncate(2);
        }
        assert!(matches!(
            fit_lmm(&cohort, 1, false),
            Err(Error::InsufficientData(_))
        ));
        let cohort = cohort_from(|_, t| t, 5);
        assert!(fit_lmm(&cohort, 3, false).is_err());
    }

    #[test]
    fn constant_snp_is_singular() {
        let mut cohort = cohort_from(|_, t| t, 8);
        for s in &mut cohort.subjects {
            s.snp = 0;
        }
        assert!(matches!(fit_lmm(&cohort, 1, true), Err(Error::SingularDesign)));
    }
}
