//! Subject-specific cumulative hazard and event-time inversion.
//!
//! The integrand `lambda * v * u^(v-1) * exp(gamma_g*snp + alpha*eta(u))` is
//! integrated with composite 16-point Gauss-Legendre on panels of width 0.5.
//! Each panel is checked against its two halves and split further until the
//! two agree to 1e-8 relative. The `u^(v-1)` factor is not smooth at zero, so
//! the first panel is graded geometrically toward the origin and the last
//! sliver `[0, eps]` is integrated after the substitution `u = eps * x^(1/v)`,
//! which removes the power factor exactly.

use std::sync::OnceLock;

use crate::model::{HazardModel, TrajectoryModel};

pub const PANEL_WIDTH: f64 = 0.5;
/// Bracket for event-time inversion.
pub const HORIZON: f64 = 100.0;
pub const TIME_TOLERANCE: f64 = 1e-9;

const PANEL_REL_TOL: f64 = 1e-8;
const MAX_SPLIT_DEPTH: u32 = 24;
const GRADING_LEVELS: i32 = 14;
const GL_POINTS: usize = 16;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, from Newton iteration on
/// the Legendre polynomial.
pub fn gauss_legendre_rule(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut derivative = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            derivative = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / derivative;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * derivative * derivative);
        rule.push((x, w));
    }
    rule.reverse();
    rule
}

fn gl16() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre_rule(GL_POINTS))
}

fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let sum: f64 = gl16().iter().map(|&(x, w)| w * f(mid + half * x)).sum();
    sum * half
}

/// GL16 on `[a, b]`, split in halves until refinement changes the value by
/// less than 1e-8 relative.
fn adaptive_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, coarse: f64, depth: u32) -> f64 {
    let mid = 0.5 * (a + b);
    let left = gauss_legendre(f, a, mid);
    let right = gauss_legendre(f, mid, b);
    let fine = left + right;
    if depth >= MAX_SPLIT_DEPTH || (fine - coarse).abs() <= PANEL_REL_TOL * fine.abs() || !fine.is_finite() {
        fine
    } else {
        adaptive_panel(f, a, mid, left, depth + 1) + adaptive_panel(f, mid, b, right, depth + 1)
    }
}

/// Hazard of one subject as a function of time.
#[derive(Debug, Clone)]
pub struct SubjectHazard {
    lambda: f64,
    shape: f64,
    /// Log relative hazard `gamma_g*snp + alpha*eta(t)` as polynomial coefficients in `t`.
    log_rel: [f64; 3],
}

impl SubjectHazard {
    pub fn new(hazard: &HazardModel, trajectory: &TrajectoryModel, b: &[f64], snp: u8) -> Self {
        let mut log_rel = [0.0; 3];
        let n = trajectory.fixed.len().max(b.len()).min(3);
        for (j, coef) in log_rel.iter_mut().enumerate().take(n) {
            let beta = trajectory.fixed.get(j).copied().unwrap_or(0.0);
            let bj = b.get(j).copied().unwrap_or(0.0);
            *coef = hazard.alpha * (beta + bj);
        }
        log_rel[0] += (hazard.gamma_g + hazard.alpha * trajectory.beta_g) * f64::from(snp);
        SubjectHazard {
            lambda: hazard.lambda,
            shape: hazard.shape,
            log_rel,
        }
    }

    fn log_relative(&self, t: f64) -> f64 {
        self.log_rel[0] + t * (self.log_rel[1] + t * self.log_rel[2])
    }

    /// Instantaneous hazard at `t > 0`.
    pub fn rate(&self, t: f64) -> f64 {
        self.lambda * self.shape * ((self.shape - 1.0) * t.ln() + self.log_relative(t)).exp()
    }

    /// `integral_0^x` for `0 < x`, graded toward the weak singularity at zero.
    fn from_zero(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let f = |t: f64| self.rate(t);
        let eps = x * 2f64.powi(-GRADING_LEVELS);
        // Substitution u = eps * s^(1/v): lambda*v*u^(v-1) du = lambda * eps^v ds.
        let inv_shape = 1.0 / self.shape;
        let g = |s: f64| {
            let u = eps * s.max(0.0).powf(inv_shape);
            self.log_relative(u).exp()
        };
        let mut total = self.lambda * eps.powf(self.shape) * gauss_legendre(&g, 0.0, 1.0);
        let mut lo = eps;
        while lo < x * (1.0 - 1e-12) {
            let hi = (2.0 * lo).min(x);
            let coarse = gauss_legendre(&f, lo, hi);
            total += adaptive_panel(&f, lo, hi, coarse, 0);
            lo = hi;
        }
        total
    }

    fn panel(&self, a: f64, b: f64) -> f64 {
        if a <= 0.0 {
            self.from_zero(b)
        } else {
            let f = |t: f64| self.rate(t);
            let coarse = gauss_legendre(&f, a, b);
            adaptive_panel(&f, a, b, coarse, 0)
        }
    }

    pub fn cumulative(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let full = (t / PANEL_WIDTH).floor() as usize;
        let mut total = 0.0;
        for k in 0..full {
            total += self.panel(k as f64 * PANEL_WIDTH, (k + 1) as f64 * PANEL_WIDTH);
        }
        let start = full as f64 * PANEL_WIDTH;
        if t > start {
            total += self.panel(start, t);
        }
        total
    }

    /// Time at which the survival function falls to `u`, or `None` when
    /// survival at the horizon still exceeds `u`.
    pub fn event_time(&self, u: f64) -> Option<f64> {
        debug_assert!(u > 0.0 && u < 1.0);
        let target = -u.ln();
        let panels = (HORIZON / PANEL_WIDTH).round() as usize;
        let mut accumulated = 0.0;
        for k in 0..panels {
            let a = k as f64 * PANEL_WIDTH;
            let b = a + PANEL_WIDTH;
            let next = accumulated + self.panel(a, b);
            if next >= target {
                return Some(self.bisect(a, b, accumulated, target));
            }
            accumulated = next;
        }
        None
    }

    fn bisect(&self, a: f64, b: f64, base: f64, target: f64) -> f64 {
        let (mut lo, mut hi) = (a, b);
        while hi - lo > TIME_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            if base + self.panel(a, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Cumulative hazard `Lambda(t)` of one subject.
pub fn cumulative_hazard(
    hazard: &HazardModel,
    trajectory: &TrajectoryModel,
    b: &[f64],
    snp: u8,
    t: f64,
) -> f64 {
    SubjectHazard::new(hazard, trajectory, b, snp).cumulative(t)
}

/// Inverts `exp(-Lambda(t)) = u` by bisection on `[0, 100]`.
pub fn solve_event_time(
    hazard: &HazardModel,
    trajectory: &TrajectoryModel,
    b: &[f64],
    snp: u8,
    u: f64,
) -> Option<f64> {
    SubjectHazard::new(hazard, trajectory, b, snp).event_time(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ErrorScale;

    fn flat() -> (HazardModel, TrajectoryModel) {
        let h = HazardModel {
            lambda: 0.01,
            shape: 1.1,
            gamma_g: 0.0,
            alpha: 0.0,
        };
        let m = TrajectoryModel {
            fixed: vec![8.5, 0.1],
            beta_g: 0.3,
            random_cov: vec![vec![2.0, -0.1], vec![-0.1, 0.1]],
            error_var: 0.7,
            error_scale: ErrorScale::Variance,
        };
        (h, m)
    }

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let rule = gauss_legendre_rule(16);
        let wsum: f64 = rule.iter().map(|p| p.1).sum();
        assert!((wsum - 2.0).abs() < 1e-14);
        // integral of x^30 over [-1, 1] is 2/31
        let v: f64 = rule.iter().map(|&(x, w)| w * x.powi(30)).sum();
        assert!((v - 2.0 / 31.0).abs() < 1e-14);
        assert!(rule.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn closed_form_weibull() {
        let (h, m) = flat();
        assert_eq!(cumulative_hazard(&h, &m, &[0.0, 0.0], 0, 0.0), 0.0);
        let got = cumulative_hazard(&h, &m, &[0.0, 0.0], 0, 10.0);
        let want = 0.01 * 10f64.powf(1.1);
        assert!((got - want).abs() < 1e-12 * want, "{got} vs {want}");
        assert!((want - 0.125_89).abs() < 1e-5);
    }

    #[test]
    fn shape_below_one_is_integrable() {
        let h = HazardModel {
            lambda: 0.2,
            shape: 0.6,
            gamma_g: 0.0,
            alpha: 0.0,
        };
        let (_, m) = flat();
        let got = cumulative_hazard(&h, &m, &[0.0, 0.0], 0, 3.3);
        let want = 0.2 * 3.3f64.powf(0.6);
        assert!((got - want).abs() < 1e-10 * want);
    }

    #[test]
    fn closed_form_event_time() {
        let (h, m) = flat();
        let t = solve_event_time(&h, &m, &[0.0, 0.0], 1, 0.5).unwrap();
        let want = (2f64.ln() / 0.01).powf(1.0 / 1.1);
        assert!((t - want).abs() < 1e-8, "{t} vs {want}");
        assert!((t - 47.11).abs() < 0.05);
    }

    #[test]
    fn near_one_draw_gives_tiny_time() {
        let (h, m) = flat();
        let t = solve_event_time(&h, &m, &[0.0, 0.0], 0, 1.0 - 1e-12).unwrap();
        assert!(t < 1e-6);
    }

    #[test]
    fn beyond_horizon() {
        let (mut h, m) = flat();
        h.lambda = 1e-6;
        assert!(solve_event_time(&h, &m, &[0.0, 0.0], 0, 0.5).is_none());
    }
}
