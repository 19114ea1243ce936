//! Longitudinal trajectory and hazard sub-models shared by simulation and estimation.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_positive, Error, Result};
use crate::linalg;

/// How the measurement-error parameter is read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorScale {
    #[default]
    Variance,
    StdDev,
}

/// Polynomial-in-time trajectory with a per-allele shift and correlated
/// subject-level random coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryModel {
    /// Polynomial coefficients, constant term first (degree <= 2).
    pub fixed: Vec<f64>,
    /// Trajectory shift per minor-allele copy.
    pub beta_g: f64,
    /// Covariance of the random intercept, slope, and optional quadratic term.
    pub random_cov: Vec<Vec<f64>>,
    pub error_var: f64,
    #[serde(default)]
    pub error_scale: ErrorScale,
}

impl TrajectoryModel {
    pub fn degree(&self) -> usize {
        self.fixed.len().saturating_sub(1)
    }

    pub fn random_dim(&self) -> usize {
        self.random_cov.len()
    }

    pub fn noise_sd(&self) -> f64 {
        match self.error_scale {
            ErrorScale::Variance => self.error_var.sqrt(),
            ErrorScale::StdDev => self.error_var,
        }
    }

    /// Row-major copy of the random-effect covariance.
    pub fn cov_flat(&self) -> Vec<f64> {
        self.random_cov.iter().flatten().copied().collect()
    }

    pub fn cov_cholesky(&self) -> Result<Vec<f64>> {
        linalg::cholesky(&self.cov_flat(), self.random_dim())
    }

    pub fn validate(&self) -> Result<()> {
        if self.fixed.is_empty() || self.fixed.len() > 3 {
            return Err(Error::invalid(
                "trajectory.fixed",
                "needs 1 to 3 polynomial coefficients (degree <= 2)",
            ));
        }
        for &b in &self.fixed {
            check_finite("trajectory.fixed", b)?;
        }
        check_finite("trajectory.beta_g", self.beta_g)?;
        check_positive("trajectory.error_var", self.error_var)?;
        let k = self.random_dim();
        if k == 0 || k > 3 {
            return Err(Error::invalid(
                "trajectory.random_cov",
                "must be a 1x1, 2x2, or 3x3 matrix",
            ));
        }
        if self.random_cov.iter().any(|row| row.len() != k) {
            return Err(Error::invalid("trajectory.random_cov", "must be square"));
        }
        for i in 0..k {
            for j in 0..k {
                if (self.random_cov[i][j] - self.random_cov[j][i]).abs() > 1e-12 {
                    return Err(Error::invalid("trajectory.random_cov", "must be symmetric"));
                }
            }
        }
        self.cov_cholesky().map_err(|_| {
            Error::invalid("trajectory.random_cov", "must be positive definite")
        })?;
        Ok(())
    }

    /// Trajectory value at `t`, random components beyond `b.len()` treated as zero.
    pub fn value(&self, b: &[f64], snp: u8, t: f64) -> f64 {
        self.value_without_snp(b, t) + self.beta_g * f64::from(snp)
    }

    /// Subject trajectory with the SNP shift removed.
    pub fn value_without_snp(&self, b: &[f64], t: f64) -> f64 {
        let mut power = 1.0;
        let mut eta = 0.0;
        for j in 0..self.fixed.len().max(b.len()) {
            let coef = self.fixed.get(j).copied().unwrap_or(0.0) + b.get(j).copied().unwrap_or(0.0);
            eta += coef * power;
            power *= t;
        }
        eta
    }
}

/// Weibull proportional-hazards model linked to the trajectory:
/// `h(t) = lambda * shape * t^(shape-1) * exp(gamma_g * snp + alpha * eta(t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HazardModel {
    pub lambda: f64,
    pub shape: f64,
    pub gamma_g: f64,
    pub alpha: f64,
}

impl HazardModel {
    pub fn validate(&self) -> Result<()> {
        check_positive("hazard.lambda", self.lambda)?;
        check_positive("hazard.shape", self.shape)?;
        check_finite("hazard.gamma_g", self.gamma_g)?;
        check_finite("hazard.alpha", self.alpha)
    }

    pub fn baseline(&self, t: f64) -> f64 {
        if t <= 0.0 {
            if self.shape == 1.0 {
                self.lambda
            } else if self.shape > 1.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.lambda * self.shape * t.powf(self.shape - 1.0)
        }
    }

    pub fn baseline_cumulative(&self, t: f64) -> f64 {
        self.lambda * t.max(0.0).powf(self.shape)
    }
}
