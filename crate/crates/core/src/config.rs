//! Versioned TOML run files shared by the command line and the presets.
//!
//! ```toml
//! schema = "jmpower/v1"
//! name = "example"
//!
//! [sim]
//! n_subjects = 1000
//! maf = 0.3
//! seed = 20240101
//! trajectory = { fixed = [8.5, 0.1], beta_g = 0.3, random_cov = [[2.0, -0.1], [-0.1, 0.1]], error_var = 0.7 }
//! hazard = { lambda = 0.01, shape = 1.1, gamma_g = 0.1, alpha = 0.25 }
//! grid = { scenario = "S1", max_followup = 10.0 }
//!
//! [study]
//! replicates = 500
//! alpha_levels = [0.05]
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::experiments::{CellOverride, Estimator, StudySpec, Sweep};
use crate::sim::SimConfig;

pub const SCHEMA: &str = "jmpower/v1";

/// What a study run reports.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    /// Empirical against calculated power.
    #[default]
    Power,
    /// Mean event counts and calculated power only.
    Events,
    /// Naive, known-trajectory and two-stage estimates of the direct effect.
    Bias,
    /// Quadratic against linear Stage-1 model.
    Misspecification,
}

fn default_alpha_levels() -> Vec<f64> {
    vec![0.05]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyOptions {
    pub replicates: usize,
    #[serde(default = "default_alpha_levels")]
    pub alpha_levels: Vec<f64>,
    #[serde(default)]
    pub analysis: Analysis,
    /// Overrides the estimators implied by `analysis`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimators: Option<Vec<Estimator>>,
}

/// Closed-form power at observed event counts over allele frequencies and
/// significance levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetroConfig {
    pub events: Vec<f64>,
    pub theta: f64,
    pub maf: Vec<f64>,
    pub alpha_levels: Vec<f64>,
}

impl RetroConfig {
    pub fn validate(&self) -> Result<()> {
        if self.events.is_empty() || self.maf.is_empty() || self.alpha_levels.is_empty() {
            return Err(Error::invalid("retro", "`events`, `maf` and `alpha_levels` must be nonempty"));
        }
        for &d in &self.events {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::invalid("retro.events", format!("must be positive, got {d}")));
            }
        }
        if !self.theta.is_finite() {
            return Err(Error::invalid("retro.theta", "must be finite"));
        }
        for &p in &self.maf {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid("retro.maf", format!("must lie in [0, 1], got {p}")));
            }
        }
        for &a in &self.alpha_levels {
            check_probability("retro.alpha_levels", a)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<StudyOptions>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<CellOverride>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retro: Option<RetroConfig>,
}

impl RunConfig {
    /// Parses and fully validates a run file.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(Error::invalid(
                "schema",
                format!("expected \"{SCHEMA}\", got \"{}\"", self.schema),
            ));
        }
        if self.sim.is_none() && self.retro.is_none() {
            return Err(Error::invalid("sim", "a run file needs a [sim] or a [retro] section"));
        }
        if let Some(sim) = &self.sim {
            sim.validate()?;
        }
        if self.study.is_some() {
            self.study_spec(None)?.validate()?;
        } else if !self.cells.is_empty() || self.sweep.is_some() {
            return Err(Error::invalid("study", "[[cells]] and [sweep] require a [study] section"));
        }
        if let Some(retro) = &self.retro {
            retro.validate()?;
        }
        Ok(())
    }

    pub fn sim_config(&self, seed: Option<u64>) -> Result<SimConfig> {
        let mut sim = self
            .sim
            .clone()
            .ok_or_else(|| Error::invalid("sim", "section is required for this command"))?;
        if let Some(seed) = seed {
            sim.seed = seed;
        }
        Ok(sim)
    }

    pub fn analysis(&self) -> Analysis {
        self.study.as_ref().map(|s| s.analysis).unwrap_or_default()
    }

    /// The Monte Carlo study described by the `[sim]`, `[study]`, `[[cells]]`
    /// and `[sweep]` sections.
    pub fn study_spec(&self, seed: Option<u64>) -> Result<StudySpec> {
        let options = self
            .study
            .as_ref()
            .ok_or_else(|| Error::invalid("study", "section is required for this command"))?;
        let estimators = options.estimators.clone().unwrap_or_else(|| match options.analysis {
            Analysis::Power => vec![Estimator::TwoStage],
            Analysis::Events => vec![],
            Analysis::Bias => vec![Estimator::Naive, Estimator::KnownTrajectory, Estimator::TwoStage],
            Analysis::Misspecification => vec![Estimator::TwoStageQuadratic, Estimator::TwoStageLinear],
        });
        Ok(StudySpec {
            sim: self.sim_config(seed)?,
            replicates: options.replicates,
            alpha_levels: options.alpha_levels.clone(),
            estimators,
            cells: self.cells.clone(),
            sweep: self.sweep.clone(),
        })
    }
}
