//! Request and response bodies and their validation.
//!
//! Field names match the run-file keys so one vocabulary serves both.

use jmpower_core::{power_given_events, required_events, Error as CoreError, GeneticDesign};
use serde::{Deserialize, Serialize};

pub const MAX_SERIES: usize = 5;
pub const MAX_POINTS: usize = 200;
/// Bound on any effect input, on the log-hazard or trajectory scale.
pub const MAX_ABS_EFFECT: f64 = 10.0;
pub const MAX_EVENTS: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        FieldError {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<CoreError> for FieldError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Invalid { field, reason } => FieldError::new(field, reason),
            CoreError::ZeroEffect => FieldError::new("theta", e.to_string()),
            CoreError::MafInfeasible { .. } => FieldError::new("maf", e.to_string()),
            other => FieldError::new("request", other.to_string()),
        }
    }
}

/// Collects every problem with a request instead of stopping at the first.
#[derive(Debug, Default)]
pub struct Checker {
    pub errors: Vec<FieldError>,
}

impl Checker {
    pub fn fail(&mut self, field: &str, message: impl Into<String>) {
        self.errors.push(FieldError::new(field, message));
    }

    pub fn open_unit(&mut self, field: &str, v: f64) {
        if !(v.is_finite() && v > 0.0 && v < 1.0) {
            self.fail(field, format!("must lie strictly between 0 and 1, got {v}"));
        }
    }

    pub fn maf(&mut self, field: &str, v: f64) {
        if !(v.is_finite() && v > 0.0 && v <= 0.5) {
            self.fail(field, format!("must lie in (0, 0.5], got {v}"));
        }
    }

    pub fn effect(&mut self, field: &str, v: f64) {
        if !(v.is_finite() && v.abs() <= MAX_ABS_EFFECT) {
            self.fail(field, format!("must be finite with magnitude at most {MAX_ABS_EFFECT}, got {v}"));
        }
    }

    pub fn events(&mut self, field: &str, v: f64) {
        if !(v.is_finite() && v > 0.0 && v <= MAX_EVENTS) {
            self.fail(field, format!("must lie in (0, {MAX_EVENTS}], got {v}"));
        }
    }

    pub fn event_rate(&mut self, field: &str, v: f64) {
        if !(v.is_finite() && v > 0.0 && v <= 1.0) {
            self.fail(field, format!("must lie in (0, 1], got {v}"));
        }
    }

    pub fn finish(self) -> Result<(), Vec<FieldError>> {
        if self.errors.is_empty() {
            Ok(())
        } else {
            Err(self.errors)
        }
    }
}

/// Either a direct overall effect or its three components.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EffectInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_g: Option<f64>,
}

impl EffectInput {
    /// The overall effect, recording problems in `check`.
    pub fn resolve(&self, check: &mut Checker) -> f64 {
        match (self.theta, self.gamma_g, self.alpha, self.beta_g) {
            (Some(theta), None, None, None) => {
                check.effect("theta", theta);
                theta
            }
            (None, Some(g), Some(a), Some(b)) => {
                check.effect("gamma_g", g);
                check.effect("alpha", a);
                check.effect("beta_g", b);
                g + a * b
            }
            (Some(_), _, _, _) => {
                check.fail("theta", "give either theta or gamma_g, alpha and beta_g, not both");
                f64::NAN
            }
            _ => {
                for (name, v) in [("gamma_g", self.gamma_g), ("alpha", self.alpha), ("beta_g", self.beta_g)] {
                    if v.is_none() {
                        check.fail(name, "required unless theta is given");
                    }
                }
                f64::NAN
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerRequest {
    pub maf: f64,
    pub alpha_level: f64,
    pub events: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_g: Option<f64>,
}

impl PowerRequest {
    pub fn effect(&self) -> EffectInput {
        EffectInput {
            theta: self.theta,
            gamma_g: self.gamma_g,
            alpha: self.alpha,
            beta_g: self.beta_g,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerResponse {
    /// Rounded to six decimals.
    pub power: f64,
    pub power_unrounded: f64,
    pub theta: f64,
    pub formula: &'static str,
    pub inputs: PowerRequest,
}

pub fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

pub fn power(req: &PowerRequest) -> Result<PowerResponse, Vec<FieldError>> {
    let mut check = Checker::default();
    check.maf("maf", req.maf);
    check.open_unit("alpha_level", req.alpha_level);
    check.events("events", req.events);
    let theta = req.effect().resolve(&mut check);
    check.finish()?;
    let p = power_given_events(req.maf, req.alpha_level, theta, req.events).map_err(|e| vec![e.into()])?;
    Ok(PowerResponse {
        power: round6(p),
        power_unrounded: p,
        theta,
        formula: "power_given_events",
        inputs: req.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSizeRequest {
    pub maf: f64,
    pub alpha_level: f64,
    pub power: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_g: Option<f64>,
}

impl SampleSizeRequest {
    pub fn effect(&self) -> EffectInput {
        EffectInput {
            theta: self.theta,
            gamma_g: self.gamma_g,
            alpha: self.alpha,
            beta_g: self.beta_g,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSizeResponse {
    pub events: f64,
    pub events_planned: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    pub theta: f64,
    pub formula: &'static str,
    pub inputs: SampleSizeRequest,
}

pub fn sample_size(req: &SampleSizeRequest) -> Result<SampleSizeResponse, Vec<FieldError>> {
    let mut check = Checker::default();
    check.maf("maf", req.maf);
    check.open_unit("alpha_level", req.alpha_level);
    check.open_unit("power", req.power);
    if let Some(rate) = req.event_rate {
        check.event_rate("event_rate", rate);
    }
    let theta = req.effect().resolve(&mut check);
    check.finish()?;
    let design = GeneticDesign::new(req.maf, req.alpha_level, req.power).map_err(|e| vec![e.into()])?;
    let events = required_events(&design, theta).map_err(|e| vec![e.into()])?;
    let n = match req.event_rate {
        Some(rate) => Some(jmpower_core::design::planned_subjects(events, rate).map_err(|e| vec![e.into()])?),
        None => None,
    };
    Ok(SampleSizeResponse {
        events,
        events_planned: jmpower_core::design::planned_events(events),
        n,
        theta,
        formula: "required_events",
        inputs: req.clone(),
    })
}

/// Quantity varied across series of a curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveSweep {
    AlphaLevel,
    Maf,
    Theta,
    GammaG,
    Alpha,
    BetaG,
    /// Event fraction; stands in for follow-up time when the x-axis is sample size.
    EventRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: CurveSweep,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_level: Option<f64>,
    /// Shorthand for a sweep over significance levels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_levels: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    /// Exactly one of the three grids sets the x-axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maf_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_g: Option<f64>,
}

impl CurveRequest {
    pub fn effect(&self) -> EffectInput {
        EffectInput {
            theta: self.theta,
            gamma_g: self.gamma_g,
            alpha: self.alpha,
            beta_g: self.beta_g,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub x: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveSeriesOut {
    pub sweep_value: Option<f64>,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveResponse {
    pub x_axis: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<CurveSweep>,
    pub series: Vec<CurveSeriesOut>,
    pub formula: &'static str,
    pub inputs: CurveRequest,
}

#[derive(Debug, Clone, Copy)]
struct Point {
    maf: f64,
    alpha_level: f64,
    theta: f64,
    events: f64,
}

pub fn curve(req: &CurveRequest) -> Result<CurveResponse, Vec<FieldError>> {
    let mut check = Checker::default();

    let axes = [("maf_grid", &req.maf_grid), ("events_grid", &req.events_grid), ("n_grid", &req.n_grid)];
    let given: Vec<_> = axes.iter().filter(|(_, g)| g.is_some()).collect();
    if given.len() != 1 {
        check.fail("maf_grid", "give exactly one of maf_grid, events_grid, n_grid");
        return Err(check.errors);
    }
    let (axis_field, grid) = (given[0].0, given[0].1.as_ref().unwrap());
    if grid.is_empty() || grid.len() > MAX_POINTS {
        check.fail(axis_field, format!("must hold 1 to {MAX_POINTS} points, got {}", grid.len()));
    }
    for &x in grid {
        match axis_field {
            "maf_grid" => check.maf(axis_field, x),
            "events_grid" => check.events(axis_field, x),
            _ => {
                if !(x.is_finite() && x >= 1.0 && x <= MAX_EVENTS) {
                    check.fail(axis_field, format!("sample sizes must lie in [1, {MAX_EVENTS}], got {x}"));
                }
            }
        }
    }

    let sweep = match (&req.alpha_levels, &req.sweep) {
        (Some(_), Some(_)) => {
            check.fail("alpha_levels", "give alpha_levels or sweep, not both");
            None
        }
        (Some(levels), None) => Some(SweepSpec {
            parameter: CurveSweep::AlphaLevel,
            values: levels.clone(),
        }),
        (None, s) => s.clone(),
    };
    if let Some(s) = &sweep {
        let field = if req.alpha_levels.is_some() { "alpha_levels" } else { "sweep.values" };
        if s.values.is_empty() || s.values.len() > MAX_SERIES {
            check.fail(field, format!("must hold 1 to {MAX_SERIES} values, got {}", s.values.len()));
        }
        for &v in &s.values {
            match s.parameter {
                CurveSweep::AlphaLevel => check.open_unit(field, v),
                CurveSweep::Maf => check.maf(field, v),
                CurveSweep::EventRate => check.event_rate(field, v),
                _ => check.effect(field, v),
            }
        }
    }
    let swept = sweep.as_ref().map(|s| s.parameter);
    let is_swept = |p: CurveSweep| swept == Some(p);

    if axis_field != "maf_grid" && !is_swept(CurveSweep::Maf) {
        match req.maf {
            Some(v) => check.maf("maf", v),
            None => check.fail("maf", "required"),
        }
    }
    if !is_swept(CurveSweep::AlphaLevel) {
        match req.alpha_level {
            Some(v) => check.open_unit("alpha_level", v),
            None => check.fail("alpha_level", "required"),
        }
    }
    match axis_field {
        "n_grid" if !is_swept(CurveSweep::EventRate) => match req.event_rate {
            Some(v) => check.event_rate("event_rate", v),
            None => check.fail("event_rate", "required when the x-axis is sample size"),
        },
        "maf_grid" => match req.events {
            Some(v) => check.events("events", v),
            None => check.fail("events", "required when the x-axis is maf"),
        },
        _ => {}
    }
    let effect_swept = matches!(swept, Some(CurveSweep::Theta | CurveSweep::GammaG | CurveSweep::Alpha | CurveSweep::BetaG));
    if !effect_swept {
        req.effect().resolve(&mut check);
    }
    check.finish()?;

    let base = Point {
        maf: req.maf.unwrap_or(f64::NAN),
        alpha_level: req.alpha_level.unwrap_or(f64::NAN),
        theta: f64::NAN,
        events: req.events.unwrap_or(f64::NAN),
    };
    let sweep_values: Vec<Option<f64>> = match &sweep {
        Some(s) => s.values.iter().map(|&v| Some(v)).collect(),
        None => vec![None],
    };
    let mut order: Vec<f64> = grid.clone();
    order.sort_by(f64::total_cmp);

    let mut series = Vec::with_capacity(sweep_values.len());
    for sv in sweep_values {
        let mut eff = req.effect();
        let mut p = base;
        let mut rate = req.event_rate;
        if let (Some(s), Some(v)) = (&sweep, sv) {
            match s.parameter {
                CurveSweep::AlphaLevel => p.alpha_level = v,
                CurveSweep::Maf => p.maf = v,
                CurveSweep::EventRate => rate = Some(v),
                CurveSweep::Theta => eff = EffectInput { theta: Some(v), ..Default::default() },
                CurveSweep::GammaG => eff.gamma_g = Some(v),
                CurveSweep::Alpha => eff.alpha = Some(v),
                CurveSweep::BetaG => eff.beta_g = Some(v),
            }
        }
        let mut c = Checker::default();
        p.theta = eff.resolve(&mut c);
        c.finish()?;
        let mut points = Vec::with_capacity(order.len());
        for &x in &order {
            let mut q = p;
            match axis_field {
                "maf_grid" => q.maf = x,
                "events_grid" => q.events = x,
                _ => q.events = x * rate.unwrap_or(f64::NAN),
            }
            let power = power_given_events(q.maf, q.alpha_level, q.theta, q.events).map_err(|e| vec![e.into()])?;
            points.push(CurvePoint { x, power });
        }
        series.push(CurveSeriesOut { sweep_value: sv, points });
    }

    Ok(CurveResponse {
        x_axis: match axis_field {
            "maf_grid" => "maf",
            "events_grid" => "events",
            _ => "n_subjects",
        },
        sweep: swept,
        series,
        formula: "power_given_events",
        inputs: req.clone(),
    })
}
