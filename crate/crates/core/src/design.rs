//! Closed-form event-count and power calculators for the overall SNP effect.
//!
//! The overall effect on the log hazard per minor-allele copy combines the
//! direct effect with the part mediated through the longitudinal trajectory,
//! `theta = gamma_g + alpha * beta_g`. With genotype variance `2p(1-p)`, the
//! number of events needed for a two-sided Wald test is
//!
//! ```text
//! D = (z_{1-beta} + z_{1-alpha_level/2})^2 / (2p(1-p) * theta^2)
//! ```
//!
//! and power for a given event count is `Phi(sqrt(2p(1-p) D) |theta| - z_{1-alpha_level/2})`.

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, check_positive, check_probability, Error, Result};
use crate::normal;

/// Allele frequency and test operating characteristics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneticDesign {
    pub maf: f64,
    pub alpha_level: f64,
    pub power: f64,
}

impl GeneticDesign {
    pub fn new(maf: f64, alpha_level: f64, power: f64) -> Result<Self> {
        let design = GeneticDesign {
            maf,
            alpha_level,
            power,
        };
        design.validate()?;
        Ok(design)
    }

    pub fn validate(&self) -> Result<()> {
        check_probability("maf", self.maf)?;
        check_probability("alpha_level", self.alpha_level)?;
        check_probability("power", self.power)
    }

    pub fn genotype_variance(&self) -> f64 {
        genotype_variance(self.maf)
    }
}

/// Direct, mediated, and trajectory effects of one SNP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectParameters {
    pub gamma_g: f64,
    pub alpha: f64,
    pub beta_g: f64,
}

impl EffectParameters {
    pub fn overall(&self) -> f64 {
        overall_effect(self)
    }
}

pub fn overall_effect(e: &EffectParameters) -> f64 {
    e.gamma_g + e.alpha * e.beta_g
}

/// Hardy-Weinberg genotype variance `2p(1-p)` of the 0/1/2 allele count.
pub fn genotype_variance(maf: f64) -> f64 {
    2.0 * maf * (1.0 - maf)
}

/// `z_{1-alpha_level/2} + z_{power}`, computed from tails so tiny levels stay exact.
fn z_sum(alpha_level: f64, power: f64) -> Result<f64> {
    let z_alpha = normal::upper_quantile(alpha_level / 2.0)?;
    let z_power = normal::quantile(power)?;
    Ok(z_alpha + z_power)
}

/// Required number of events (real-valued; see [`planned_events`]).
pub fn required_events(design: &GeneticDesign, theta: f64) -> Result<f64> {
    design.validate()?;
    check_finite("theta", theta)?;
    if theta == 0.0 {
        return Err(Error::ZeroEffect);
    }
    let z = z_sum(design.alpha_level, design.power)?;
    Ok(z * z / (design.genotype_variance() * theta * theta))
}

/// Power of the two-sided test with `events` observed events.
///
/// Uses `|theta|`; the rejection mass in the opposite tail is ignored, so a
/// null effect gives `alpha_level / 2`.
pub fn power_given_events(maf: f64, alpha_level: f64, theta: f64, events: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&maf) {
        return Err(Error::invalid("maf", format!("must lie in [0, 1], got {maf}")));
    }
    check_probability("alpha_level", alpha_level)?;
    check_finite("theta", theta)?;
    if !(events.is_finite() && events >= 0.0) {
        return Err(Error::invalid(
            "events",
            format!("must be nonnegative, got {events}"),
        ));
    }
    let z_alpha = normal::upper_quantile(alpha_level / 2.0)?;
    let signal = (genotype_variance(maf) * events).sqrt() * theta.abs();
    Ok(normal::cdf(signal - z_alpha))
}

/// Smallest |theta| detectable with the design's power from `events` events.
pub fn detectable_effect(design: &GeneticDesign, events: f64) -> Result<f64> {
    design.validate()?;
    check_positive("events", events)?;
    let z = z_sum(design.alpha_level, design.power)?;
    Ok(z / (design.genotype_variance() * events).sqrt())
}

/// Minor allele frequency in (0, 0.5] at which `events` events give the target power.
pub fn solve_required_maf(events: f64, theta: f64, alpha_level: f64, power: f64) -> Result<f64> {
    check_positive("events", events)?;
    check_finite("theta", theta)?;
    if theta == 0.0 {
        return Err(Error::ZeroEffect);
    }
    let z = z_sum(alpha_level, power)?;
    let required_variance = z * z / (events * theta * theta);
    if required_variance > 0.5 {
        return Err(Error::MafInfeasible { required_variance });
    }
    // 2p^2 - 2p + v = 0, smaller root; written to avoid cancellation for small v.
    let disc = (1.0 - 2.0 * required_variance).max(0.0).sqrt();
    Ok(required_variance / (1.0 + disc))
}

/// Event count rounded up for planning.
pub fn planned_events(events: f64) -> u64 {
    events.ceil() as u64
}

/// Subjects needed when a fraction `event_rate` of them are expected to have events.
pub fn planned_subjects(events: f64, event_rate: f64) -> Result<u64> {
    if !(event_rate.is_finite() && event_rate > 0.0 && event_rate <= 1.0) {
        return Err(Error::invalid(
            "event_rate",
            format!("must lie in (0, 1], got {event_rate}"),
        ));
    }
    Ok((events / event_rate).ceil() as u64)
}
