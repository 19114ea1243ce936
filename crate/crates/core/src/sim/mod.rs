//! Cohort simulation: Hardy-Weinberg genotypes, correlated random effects,
//! noisy measurements on a visit grid, event times from the subject hazard,
//! uniform censoring over the second half of follow-up, and interval
//! recording on the assessment grid.

mod export;
mod grid;
mod hazard;
mod rng;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use export::{write_longitudinal, write_survival, LONGITUDINAL_COLUMNS, SURVIVAL_COLUMNS};
pub use grid::{GridSpec, Scenario, TimeGrid};
pub use hazard::{
    cumulative_hazard, gauss_legendre_rule, solve_event_time, SubjectHazard, HORIZON,
    PANEL_WIDTH, TIME_TOLERANCE,
};
pub use rng::{replicate_key, subject_rng, SubjectRng};

use crate::error::{check_probability, Error, Result};
use crate::linalg;
use crate::model::{HazardModel, TrajectoryModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_subjects: usize,
    pub maf: f64,
    pub trajectory: TrajectoryModel,
    pub hazard: HazardModel,
    pub grid: TimeGrid,
    #[serde(default)]
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 {
            return Err(Error::invalid("sim.n_subjects", "must be at least 1"));
        }
        check_probability("sim.maf", self.maf)?;
        self.trajectory.validate()?;
        self.hazard.validate()?;
        self.grid.validate()
    }

    pub fn overall_effect(&self) -> f64 {
        self.hazard.gamma_g + self.hazard.alpha * self.trajectory.beta_g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub time: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub id: usize,
    pub snp: u8,
    pub random_effects: Vec<f64>,
    pub measurements: Vec<Measurement>,
    /// `None` when the event would fall beyond the inversion horizon.
    pub latent_time: Option<f64>,
    pub censor_time: f64,
    pub observed_time: f64,
    pub event: bool,
    /// Assessment interval `(t_L, t_U]` holding the observed time; `None` when
    /// the subject was clamped to administrative censoring.
    pub interval: Option<(f64, f64)>,
}

impl SubjectRecord {
    /// Time used in survival analysis: the upper end of the assessment interval.
    pub fn recorded_time(&self, grid: &TimeGrid) -> f64 {
        self.interval.map_or(grid.max_followup, |(_, upper)| upper)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    pub subjects: Vec<SubjectRecord>,
    pub grid: TimeGrid,
    /// Generating model, kept so true trajectories can be recovered.
    pub trajectory: TrajectoryModel,
}

impl Cohort {
    pub fn event_count(&self) -> usize {
        self.subjects.iter().filter(|s| s.event).count()
    }
}

/// Outcome of placing an observed time on the assessment grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Discretized {
    Interval { lower: f64, upper: f64 },
    /// The time fell past the last assessment; recorded as censored at `at`.
    AdministrativelyCensored { at: f64 },
}

pub fn discretize_observation(observed: f64, grid: &TimeGrid) -> Discretized {
    match grid.bracket(observed) {
        Some((lower, upper)) => Discretized::Interval { lower, upper },
        None => Discretized::AdministrativelyCensored {
            at: grid.max_followup,
        },
    }
}

/// Allele count under Hardy-Weinberg equilibrium.
pub fn sample_genotype<R: Rng + ?Sized>(maf: f64, rng: &mut R) -> u8 {
    let q = 1.0 - maf;
    let u: f64 = rng.random();
    if u < q * q {
        0
    } else if u < q * q + 2.0 * maf * q {
        1
    } else {
        2
    }
}

/// Mean-zero normal vector with covariance `L L'`, `L` the lower Cholesky factor.
pub fn sample_random_effects<R: Rng + ?Sized>(chol: &[f64], dim: usize, rng: &mut R) -> Vec<f64> {
    let z: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    linalg::lower_mul_vec(chol, dim, &z)
}

/// One noisy measurement per longitudinal visit.
pub fn simulate_longitudinal<R: Rng + ?Sized>(
    model: &TrajectoryModel,
    b: &[f64],
    snp: u8,
    grid: &TimeGrid,
    rng: &mut R,
) -> Vec<Measurement> {
    let sd = model.noise_sd();
    grid.longitudinal
        .iter()
        .map(|&time| {
            let noise: f64 = rng.sample(StandardNormal);
            Measurement {
                time,
                value: model.value(b, snp, time) + sd * noise,
            }
        })
        .collect()
}

pub fn sample_censoring<R: Rng + ?Sized>(max_followup: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    0.5 * max_followup * (1.0 + u)
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

fn simulate_subject(cfg: &SimConfig, chol: &[f64], id: usize, rng: &mut SubjectRng) -> SubjectRecord {
    let snp = sample_genotype(cfg.maf, rng);
    let b = sample_random_effects(chol, cfg.trajectory.random_dim(), rng);
    let u = open_unit(rng);
    let censor_time = sample_censoring(cfg.grid.max_followup, rng);
    let mut measurements = simulate_longitudinal(&cfg.trajectory, &b, snp, &cfg.grid, rng);

    let latent_time = SubjectHazard::new(&cfg.hazard, &cfg.trajectory, &b, snp).event_time(u);
    let (observed, mut event) = match latent_time {
        Some(t) if t <= censor_time => (t, true),
        _ => (censor_time, false),
    };
    let interval = match discretize_observation(observed, &cfg.grid) {
        Discretized::Interval { lower, upper } => Some((lower, upper)),
        Discretized::AdministrativelyCensored { .. } => {
            event = false;
            None
        }
    };
    measurements.retain(|m| m.time <= observed);

    SubjectRecord {
        id,
        snp,
        random_effects: b,
        measurements,
        latent_time,
        censor_time,
        observed_time: observed,
        event,
        interval,
    }
}

/// Replicate `replicate` of the configured study; subject `i` draws from
/// stream `(cfg.seed, replicate, i)`.
pub fn simulate_replicate(cfg: &SimConfig, replicate: u64) -> Result<Cohort> {
    cfg.validate()?;
    let chol = cfg.trajectory.cov_cholesky()?;
    let subjects = (0..cfg.n_subjects)
        .map(|i| {
            let mut rng = subject_rng(cfg.seed, replicate, i as u64);
            simulate_subject(cfg, &chol, i, &mut rng)
        })
        .collect();
    Ok(Cohort {
        subjects,
        grid: cfg.grid.clone(),
        trajectory: cfg.trajectory.clone(),
    })
}

pub fn simulate_cohort(cfg: &SimConfig) -> Result<Cohort> {
    simulate_replicate(cfg, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ErrorScale;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn reference(n: usize) -> SimConfig {
        SimConfig {
            n_subjects: n,
            maf: 0.3,
            trajectory: TrajectoryModel {
                fixed: vec![8.5, 0.1, 0.0],
                beta_g: 0.3,
                random_cov: vec![vec![2.0, -0.1], vec![-0.1, 0.1]],
                error_var: 0.7,
                error_scale: ErrorScale::Variance,
            },
            hazard: HazardModel {
                lambda: 0.01,
                shape: 1.1,
                gamma_g: 0.1,
                alpha: 0.25,
            },
            grid: Scenario::S1.grid(10.0).unwrap(),
            seed: 42,
        }
    }

    #[test]
    fn genotype_edge() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| sample_genotype(1e-12, &mut rng) == 0));
    }

    #[test]
    fn censoring_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let c = sample_censoring(10.0, &mut rng);
            assert!((5.0..=10.0).contains(&c));
        }
        assert!(sample_censoring(1e-12, &mut rng) < 1e-11);
    }

    #[test]
    fn discretize_examples() {
        let g = Scenario::S1.grid(10.0).unwrap();
        assert_eq!(
            discretize_observation(3.2, &g),
            Discretized::Interval { lower: 3.0, upper: 3.5 }
        );
        assert_eq!(
            discretize_observation(4.0, &g),
            Discretized::Interval { lower: 3.5, upper: 4.0 }
        );
        assert_eq!(
            discretize_observation(11.0, &g),
            Discretized::AdministrativelyCensored { at: 10.0 }
        );
    }

    #[test]
    fn single_subject_reproducible() {
        let cfg = reference(1);
        let a = simulate_cohort(&cfg).unwrap();
        let b = simulate_cohort(&cfg).unwrap();
        assert_eq!(a.subjects.len(), 1);
        assert_eq!(a, b);
    }

    #[test]
    fn record_invariants() {
        let cfg = reference(300);
        let cohort = simulate_cohort(&cfg).unwrap();
        for s in &cohort.subjects {
            let latent = s.latent_time.unwrap_or(f64::INFINITY);
            assert_eq!(s.observed_time, latent.min(s.censor_time));
            assert_eq!(s.event, latent <= s.censor_time);
            let (lo, hi) = s.interval.unwrap();
            assert!(lo < s.observed_time && s.observed_time <= hi);
            assert!(s.measurements.iter().all(|m| m.time <= s.observed_time));
            assert!(!s.measurements.is_empty());
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = reference(0);
        assert!(simulate_cohort(&cfg).is_err());
        cfg.n_subjects = 5;
        cfg.maf = 1.0;
        assert!(simulate_cohort(&cfg).is_err());
    }
}
