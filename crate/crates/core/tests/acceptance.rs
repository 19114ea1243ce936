//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! The Monte Carlo criteria run at full desk scale (500–1000 replicates of
//! 1000 subjects) and take several minutes on one core. The report always
//! exits 0 so that statistically honest misses are visible without breaking
//! the build; set `ACCEPTANCE_STRICT=1` to exit 1 on any FAIL.

use std::time::Instant;

use jmpower_core::config::RunConfig;
use jmpower_core::experiments::{
    curve_from_study, max_series_gap, run_cell, run_study, CellResult, Estimator, StudySpec, Sweep,
    SweepParameter,
};
use jmpower_core::model::ErrorScale;
use jmpower_core::sim::{cumulative_hazard, solve_event_time};
use jmpower_core::{power_given_events, HazardModel, TrajectoryModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Report {
    passed: usize,
    failed: usize,
}

impl Report {
    fn check(&mut self, name: &str, ok: bool, detail: String, started: Instant) {
        let verdict = if ok { "PASS" } else { "FAIL" };
        println!("{verdict} {name}: {detail} [{:.1}s]", started.elapsed().as_secs_f64());
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
    }
}

fn preset(name: &str) -> RunConfig {
    let path = format!("{}/../../presets/{name}.toml", env!("CARGO_MANIFEST_DIR"));
    RunConfig::from_toml(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn single_cell(spec: &StudySpec, index: usize) -> CellResult {
    let cells = spec.resolve_cells().unwrap();
    run_cell(&cells[index], spec.replicates, &spec.alpha_levels, &spec.estimators).unwrap()
}

/// (alpha, beta_g, gamma_g, D-bar, calculated power) per reference row.
const TABLE1: [(f64, f64, f64, f64, f64); 10] = [
    (0.25, 0.3, 0.1, 610.21, 0.800),
    (0.25, 0.3, 0.1, 616.49, 0.804),
    (0.25, 0.3, 0.1, 610.21, 0.800),
    (0.25, 0.3, 0.1, 608.66, 0.799),
    (0.25, 0.3, 0.1, 607.12, 0.798),
    (0.25, 0.1, 0.05, 586.98, 0.217),
    (0.25, 0.1, 0.1, 597.41, 0.508),
    (0.25, 0.5, 0.1, 617.86, 0.952),
    (0.15, 0.3, 0.1, 321.85, 0.392),
    (0.15, 0.3, 0.2, 338.69, 0.832),
];

const TABLE2: [(f64, f64); 8] = [
    (5e-2, 0.978),
    (1e-2, 0.919),
    (1e-3, 0.753),
    (1e-4, 0.533),
    (1e-5, 0.329),
    (1e-6, 0.179),
    (1e-7, 0.088),
    (1e-8, 0.039),
];

fn table1_formula(r: &mut Report) {
    let t = Instant::now();
    let worst = TABLE1
        .iter()
        .map(|&(alpha, beta_g, gamma_g, d, expected)| {
            (power_given_events(0.3, 0.05, gamma_g + alpha * beta_g, d).unwrap() - expected).abs()
        })
        .fold(0.0, f64::max);
    let fast = t.elapsed().as_secs_f64() < 1.0;
    r.check("table1-formula", worst <= 0.001 && fast, format!("max |error| {worst:.5} over 10 rows"), t);
}

fn table2_formula(r: &mut Report) {
    let t = Instant::now();
    let worst = TABLE2
        .iter()
        .map(|&(level, expected)| (power_given_events(0.3, level, 0.25, 601.64).unwrap() - expected).abs())
        .fold(0.0, f64::max);
    let fast = t.elapsed().as_secs_f64() < 1.0;
    r.check("table2-formula", worst <= 0.001 && fast, format!("max |error| {worst:.5} over 8 levels"), t);
}

fn table5_events(r: &mut Report) {
    let t = Instant::now();
    let mut cfg = preset("figure1");
    cfg.sweep = None;
    cfg.study.as_mut().unwrap().replicates = 500;
    let spec = cfg.study_spec(None).unwrap();
    let cells = spec.resolve_cells().unwrap();
    let mut details = Vec::new();
    let mut ok = true;
    for (cell, target) in [(&cells[0], 351.15), (&cells[2], 607.51)] {
        let res = run_cell(cell, 500, &spec.alpha_levels, &[]).unwrap();
        ok &= (res.d_bar - target).abs() <= 5.0;
        details.push(format!("tau={} d_bar={:.2} (target {target})", cell.sim.grid.max_followup, res.d_bar));
    }
    r.check("table5-events", ok, details.join(", "), t);
}

fn band(calculated: f64, reps: usize) -> f64 {
    3.0 * (calculated * (1.0 - calculated) / reps as f64).sqrt() + 0.02
}

fn table1_empirical(r: &mut Report) {
    let t = Instant::now();
    let spec = preset("table1").study_spec(None).unwrap();
    let cell = single_cell(&spec, 0);
    let p = cell.power_for(Estimator::TwoStage, 0.05).unwrap();
    let ok = (p.empirical - 0.787).abs() <= 0.05 && (p.empirical - p.calculated).abs() < band(p.calculated, cell.completed);
    r.check(
        "table1-row1-empirical",
        ok,
        format!(
            "empirical {:.3} over {} reps, calculated {:.3} at d_bar {:.2} (target 0.787 ± 0.05; band ±{:.3})",
            p.empirical,
            cell.completed,
            p.calculated,
            cell.d_bar,
            band(p.calculated, cell.completed)
        ),
        t,
    );

    // Replicate streams are shared, so the first 100 replicates are exactly a 100-replicate run.
    let t = Instant::now();
    let first: Vec<f64> = cell.p_values(Estimator::TwoStage).into_iter().take(100).collect();
    let smoke = first.iter().filter(|&&pv| pv < 0.05).count() as f64 / first.len() as f64;
    r.check(
        "table1-row1-smoke",
        (smoke - 0.787).abs() <= 0.10,
        format!("empirical {smoke:.3} over the first {} reps (target 0.787 ± 0.10)", first.len()),
        t,
    );
}

fn table4_bias(r: &mut Report) {
    let t = Instant::now();
    let spec = preset("table4").study_spec(None).unwrap();
    let cell = single_cell(&spec, 2);
    let mean = |e: Estimator, coef: &str| cell.summary_for(e, coef).unwrap().mean;
    let naive = mean(Estimator::Naive, "gamma_g");
    let known = mean(Estimator::KnownTrajectory, "gamma_g");
    let two_stage = mean(Estimator::TwoStage, "theta_g");
    let ok = (0.067..=0.087).contains(&naive)
        && (0.090..=0.110).contains(&two_stage)
        && (0.090..=0.110).contains(&known)
        && naive < two_stage;
    r.check(
        "table4-bias",
        ok,
        format!(
            "alpha=0.5 lambda=0.001, {} reps: naive {naive:.4}, known {known:.4}, two-stage {two_stage:.4}",
            cell.completed
        ),
        t,
    );
}

fn table3_misspecification(r: &mut Report) {
    let t = Instant::now();
    let mut cfg = preset("table3");
    cfg.sweep = Some(Sweep {
        parameter: SweepParameter::Beta2,
        values: vec![0.2],
    });
    let spec = cfg.study_spec(None).unwrap();
    let cell = single_cell(&spec, 0);
    let quad = cell.power_for(Estimator::TwoStageQuadratic, 0.05).unwrap();
    let lin = cell.power_for(Estimator::TwoStageLinear, 0.05).unwrap();
    let ok = quad.empirical - lin.empirical >= 0.02
        && (quad.empirical - 0.515).abs() <= 0.06
        && (lin.empirical - 0.461).abs() <= 0.06;
    r.check(
        "table3-misspecification",
        ok,
        format!(
            "beta_2=0.2, {} reps: quadratic {:.3}, linear {:.3}, calculated {:.3} at d_bar {:.2}",
            cell.completed, quad.empirical, lin.empirical, quad.calculated, cell.d_bar
        ),
        t,
    );
}

fn random_trajectory(rng: &mut ChaCha8Rng) -> TrajectoryModel {
    TrajectoryModel {
        fixed: vec![rng.random_range(5.0..10.0), rng.random_range(-0.3..0.3)],
        beta_g: rng.random_range(-0.5..0.5),
        random_cov: vec![vec![2.0, -0.1], vec![-0.1, 0.1]],
        error_var: 0.7,
        error_scale: ErrorScale::Variance,
    }
}

fn event_time_oracle(r: &mut Report) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for _ in 0..10_000 {
        let hazard = HazardModel {
            lambda: rng.random_range(0.001..0.05),
            shape: rng.random_range(0.7..1.6),
            gamma_g: 0.0,
            alpha: 0.0,
        };
        let trajectory = random_trajectory(&mut rng);
        let b = [rng.random_range(-1.0..1.0), rng.random_range(-0.3..0.3)];
        let snp = rng.random_range(0..3u8);
        let u: f64 = rng.random_range(1e-6..1.0);
        let exact = (-u.ln() / hazard.lambda).powf(1.0 / hazard.shape);
        match solve_event_time(&hazard, &trajectory, &b, snp, u) {
            Some(solved) => {
                worst = worst.max((solved - exact).abs());
                compared += 1;
            }
            // Beyond the search window: only acceptable when the exact time is too.
            None => worst = worst.max(if exact > 100.0 { 0.0 } else { f64::INFINITY }),
        }
    }
    r.check(
        "event-time-oracle",
        worst <= 1e-6,
        format!("max |error| {worst:.2e} over 10000 draws ({compared} inside the search window)"),
        t,
    );
}

/// Midpoint Riemann sum of the hazard, written out from the model definition.
fn riemann_cumulative(h: &HazardModel, m: &TrajectoryModel, b: &[f64], snp: u8, upper: f64, steps: usize) -> f64 {
    let dt = upper / steps as f64;
    let g = f64::from(snp);
    (0..steps)
        .map(|i| {
            let s = (i as f64 + 0.5) * dt;
            let traj: f64 = m.fixed[0] + b[0] + (m.fixed[1] + b[1]) * s + m.beta_g * g;
            h.lambda * h.shape * s.powf(h.shape - 1.0) * (h.gamma_g * g + h.alpha * traj).exp() * dt
        })
        .sum()
}

fn cumulative_oracle(r: &mut Report) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let hazard = HazardModel {
            lambda: rng.random_range(0.001..0.02),
            // Shapes below 1 make the midpoint rule itself inaccurate near 0.
            shape: rng.random_range(1.0..1.5),
            gamma_g: rng.random_range(-0.3..0.3),
            alpha: rng.random_range(-0.5..0.5),
        };
        let trajectory = random_trajectory(&mut rng);
        let b = [rng.random_range(-1.0..1.0), rng.random_range(-0.3..0.3)];
        let snp = rng.random_range(0..3u8);
        let upper = rng.random_range(0.5..10.0);
        let fast = cumulative_hazard(&hazard, &trajectory, &b, snp, upper);
        let oracle = riemann_cumulative(&hazard, &trajectory, &b, snp, upper, 1_000_000);
        worst = worst.max(((fast - oracle) / oracle).abs());
    }
    r.check(
        "cumulative-hazard-oracle",
        worst <= 1e-6,
        format!("max relative error {worst:.2e} over 100 parameter sets"),
        t,
    );
}

fn figure1_collapse(r: &mut Report) {
    let t = Instant::now();
    let spec = preset("figure1").study_spec(None).unwrap();
    let result = run_study(&spec).unwrap();
    let series = curve_from_study(&result, 0.05).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..series.len() {
        for j in i + 1..series.len() {
            worst = worst.max(max_series_gap(&series[i], &series[j]));
        }
    }
    r.check(
        "figure1-collapse",
        series.len() == 3 && worst < 0.005,
        format!("max pointwise gap {worst:.5} across {} follow-up series, {} reps", series.len(), spec.replicates),
        t,
    );
}

fn type1_error(r: &mut Report) {
    let t = Instant::now();
    let spec = preset("type1").study_spec(None).unwrap();
    let cell = single_cell(&spec, 0);
    let p = cell.power_for(Estimator::TwoStage, 0.05).unwrap();
    r.check(
        "type1-error",
        (p.empirical - 0.05).abs() <= 0.02,
        format!("rejection rate {:.3} over {} reps (target 0.05 ± 0.02)", p.empirical, cell.completed),
        t,
    );
}

fn main() {
    let mut report = Report { passed: 0, failed: 0 };
    table1_formula(&mut report);
    table2_formula(&mut report);
    event_time_oracle(&mut report);
    cumulative_oracle(&mut report);
    table5_events(&mut report);
    figure1_collapse(&mut report);
    table1_empirical(&mut report);
    type1_error(&mut report);
    table4_bias(&mut report);
    table3_misspecification(&mut report);
    println!("{} passed, {} failed", report.passed, report.failed);
    if report.failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
