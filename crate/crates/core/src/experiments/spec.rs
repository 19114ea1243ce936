use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::sim::{Scenario, SimConfig};

/// Which analysis is applied to each simulated replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Two-stage test with a Stage-1 polynomial of the generating degree.
    TwoStage,
    /// Two-stage test forcing a linear Stage-1 model.
    TwoStageLinear,
    /// Two-stage test forcing a quadratic Stage-1 model.
    TwoStageQuadratic,
    /// Cox model on the SNP alone.
    Naive,
    /// Cox model on the SNP and the generating trajectory.
    KnownTrajectory,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::TwoStage => "two_stage",
            Estimator::TwoStageLinear => "two_stage_linear",
            Estimator::TwoStageQuadratic => "two_stage_quadratic",
            Estimator::Naive => "naive",
            Estimator::KnownTrajectory => "known_trajectory",
        }
    }

    /// Stage-1 polynomial degree, for the two-stage variants.
    pub fn stage1_degree(self, generating_degree: usize) -> Option<usize> {
        match self {
            Estimator::TwoStage => Some(generating_degree.clamp(1, 2)),
            Estimator::TwoStageLinear => Some(1),
            Estimator::TwoStageQuadratic => Some(2),
            Estimator::Naive | Estimator::KnownTrajectory => None,
        }
    }
}

/// Parameters a cell or sweep may change relative to the base simulation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_subjects: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<f64>,
    /// Quadratic time coefficient of the trajectory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_cov: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_var: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_followup: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
}

impl CellOverride {
    /// Later values win field by field.
    pub fn merged(&self, later: &CellOverride) -> CellOverride {
        macro_rules! pick {
            ($($f:ident),*) => {
                CellOverride { $($f: later.$f.clone().or_else(|| self.$f.clone()),)* }
            };
        }
        pick!(
            label, n_subjects, maf, alpha, gamma_g, beta_g, lambda, shape, beta_2, random_cov,
            error_var, max_followup, scenario
        )
    }

    /// `(column, value)` pairs of the fields that are set, in a fixed order.
    pub fn parameters(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut num = |name: &'static str, v: Option<f64>| {
            if let Some(v) = v {
                out.push((name, format!("{v}")));
            }
        };
        num("n_subjects", self.n_subjects.map(|n| n as f64));
        num("maf", self.maf);
        num("alpha", self.alpha);
        num("gamma_g", self.gamma_g);
        num("beta_g", self.beta_g);
        num("lambda", self.lambda);
        num("shape", self.shape);
        num("beta_2", self.beta_2);
        num("error_var", self.error_var);
        num("max_followup", self.max_followup);
        if let Some(cov) = &self.random_cov {
            let flat: Vec<String> = cov.iter().flatten().map(|v| format!("{v}")).collect();
            out.push(("random_cov", flat.join(" ")));
        }
        if let Some(s) = self.scenario {
            out.push(("scenario", s.name().to_string()));
        }
        if let Some(label) = &self.label {
            out.push(("label", label.clone()));
        }
        out
    }

    /// The base configuration with these overrides applied and validated.
    pub fn apply(&self, base: &SimConfig) -> Result<SimConfig> {
        let mut cfg = base.clone();
        if let Some(n) = self.n_subjects {
            cfg.n_subjects = n;
        }
        if let Some(v) = self.maf {
            cfg.maf = v;
        }
        if let Some(v) = self.alpha {
            cfg.hazard.alpha = v;
        }
        if let Some(v) = self.gamma_g {
            cfg.hazard.gamma_g = v;
        }
        if let Some(v) = self.beta_g {
            cfg.trajectory.beta_g = v;
        }
        if let Some(v) = self.lambda {
            cfg.hazard.lambda = v;
        }
        if let Some(v) = self.shape {
            cfg.hazard.shape = v;
        }
        if let Some(v) = self.beta_2 {
            if cfg.trajectory.fixed.len() < 3 {
                cfg.trajectory.fixed.resize(3, 0.0);
            }
            cfg.trajectory.fixed[2] = v;
        }
        if let Some(cov) = &self.random_cov {
            cfg.trajectory.random_cov = cov.clone();
        }
        if let Some(v) = self.error_var {
            cfg.trajectory.error_var = v;
        }
        let followup = self.max_followup.unwrap_or(cfg.grid.max_followup);
        cfg.grid = match self.scenario.or(cfg.grid.scenario) {
            Some(s) => s.grid(followup)?,
            None if self.max_followup.is_some() => cfg.grid.with_followup(followup)?,
            None => cfg.grid,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    NSubjects,
    MaxFollowup,
    Alpha,
    GammaG,
    BetaG,
    Maf,
    Lambda,
    #[serde(rename = "beta_2")]
    Beta2,
}

impl SweepParameter {
    fn to_override(self, value: f64) -> Result<CellOverride> {
        let mut o = CellOverride::default();
        match self {
            SweepParameter::NSubjects => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::invalid("sweep.values", format!("n_subjects must be a positive integer, got {value}")));
                }
                o.n_subjects = Some(value as usize);
            }
            SweepParameter::MaxFollowup => o.max_followup = Some(value),
            SweepParameter::Alpha => o.alpha = Some(value),
            SweepParameter::GammaG => o.gamma_g = Some(value),
            SweepParameter::BetaG => o.beta_g = Some(value),
            SweepParameter::Maf => o.maf = Some(value),
            SweepParameter::Lambda => o.lambda = Some(value),
            SweepParameter::Beta2 => o.beta_2 = Some(value),
        }
        Ok(o)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

fn default_alpha_levels() -> Vec<f64> {
    vec![0.05]
}

fn default_estimators() -> Vec<Estimator> {
    vec![Estimator::TwoStage]
}

/// A Monte Carlo study: a base simulation, optional per-cell overrides, an
/// optional one-parameter sweep crossed with the cells, and the analyses to
/// run on every replicate. An empty estimator list simulates event counts only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySpec {
    pub sim: SimConfig,
    pub replicates: usize,
    #[serde(default = "default_alpha_levels")]
    pub alpha_levels: Vec<f64>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<CellOverride>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

/// One fully resolved cell of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub overrides: CellOverride,
    pub sim: SimConfig,
}

impl StudySpec {
    pub fn new(sim: SimConfig, replicates: usize) -> Self {
        StudySpec {
            sim,
            replicates,
            alpha_levels: default_alpha_levels(),
            estimators: default_estimators(),
            cells: Vec::new(),
            sweep: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::invalid("replicates", "must be at least 1"));
        }
        if self.alpha_levels.is_empty() {
            return Err(Error::invalid("alpha_levels", "must not be empty"));
        }
        for &a in &self.alpha_levels {
            check_probability("alpha_levels", a)?;
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::invalid("sweep.values", "must not be empty"));
            }
        }
        self.resolve_cells().map(|_| ())
    }

    /// Cells in output order: each explicit cell (or the base alone), crossed
    /// with each sweep value.
    pub fn resolve_cells(&self) -> Result<Vec<Cell>> {
        let bases = if self.cells.is_empty() {
            vec![CellOverride::default()]
        } else {
            self.cells.clone()
        };
        let mut out = Vec::new();
        for base in &bases {
            let variants = match &self.sweep {
                Some(sweep) => sweep
                    .values
                    .iter()
                    .map(|&v| sweep.parameter.to_override(v).map(|o| base.merged(&o)))
                    .collect::<Result<Vec<_>>>()?,
                None => vec![base.clone()],
            };
            for overrides in variants {
                let sim = overrides.apply(&self.sim)?;
                out.push(Cell { overrides, sim });
            }
        }
        Ok(out)
    }
}

