use jmpower_core::estimate::{
    fit_cox, fit_lmm, naive_cox, two_stage_test, CountingProcessData, CountingRow,
};
use jmpower_core::model::ErrorScale;
use jmpower_core::sim::{simulate_cohort, Scenario, SimConfig};
use jmpower_core::{HazardModel, TrajectoryModel};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reference(n: usize, seed: u64) -> SimConfig {
    SimConfig {
        n_subjects: n,
        maf: 0.3,
        trajectory: TrajectoryModel {
            fixed: vec![8.5, 0.1],
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
        seed,
    }
}

/// One row per subject: exponential times with log hazard ratio `beta` for a
/// binary covariate, uniformly censored.
fn exponential_data(n: usize, beta: f64, seed: u64) -> (CountingProcessData, Vec<(f64, bool, f64)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = Vec::with_capacity(n);
    for _ in 0..n {
        let x = f64::from(rng.random_bool(0.5) as u8);
        let t = -rng.random_range(f64::EPSILON..1.0f64).ln() / (0.1 * (beta * x).exp());
        let c = rng.random_range(0.0..20.0);
        raw.push((t.min(c), t <= c, x));
    }
    let rows = raw
        .iter()
        .enumerate()
        .map(|(i, &(time, event, x))| CountingRow {
            subject: i,
            start: 0.0,
            stop: time,
            event,
            covariates: vec![x],
        })
        .collect();
    let data = CountingProcessData {
        covariate_names: vec!["x".into()],
        rows,
    };
    (data, raw)
}

/// Newton-Raphson on the Breslow partial likelihood of one covariate, by
/// direct sums over risk sets.
fn oracle_cox(raw: &[(f64, bool, f64)]) -> (f64, f64) {
    let mut beta = 0.0;
    let mut info = 0.0;
    for _ in 0..100 {
        let (mut score, mut i) = (0.0, 0.0);
        for &(t, _, x) in raw.iter().filter(|r| r.1) {
            let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
            for &(u, _, z) in raw {
                if u >= t {
                    let w = (beta * z).exp();
                    s0 += w;
                    s1 += w * z;
                    s2 += w * z * z;
                }
            }
            score += x - s1 / s0;
            i += s2 / s0 - (s1 / s0).powi(2);
        }
        info = i;
        let step = score / i;
        beta += step;
        if step.abs() < 1e-13 {
            break;
        }
    }
    (beta, 1.0 / info.sqrt())
}

#[test]
fn cox_matches_direct_partial_likelihood() {
    for (beta, seed) in [(0.5, 1), (-0.3, 2), (0.0, 3)] {
        let (data, raw) = exponential_data(400, beta, seed);
        let fit = fit_cox(&data, &["x"]).unwrap();
        let (b, se) = oracle_cox(&raw);
        assert!(fit.converged);
        assert!((fit.coefficients[0] - b).abs() < 1e-8, "{} vs {b}", fit.coefficients[0]);
        assert!((fit.std_errors[0] - se).abs() < 1e-8);
        assert!((b - beta).abs() < 4.0 * se, "estimate {b} far from {beta}");
    }
}

#[test]
fn cox_is_invariant_to_row_order_and_labels() {
    let (data, _) = exponential_data(300, 0.4, 9);
    let base = fit_cox(&data, &["x"]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut labels: Vec<usize> = (0..data.rows.len()).collect();
    labels.shuffle(&mut rng);
    let mut rows: Vec<CountingRow> = data
        .rows
        .iter()
        .map(|r| CountingRow {
            subject: labels[r.subject] + 1000,
            ..r.clone()
        })
        .collect();
    rows.shuffle(&mut rng);
    rows.sort_by_key(|r| r.subject);
    let shuffled = CountingProcessData {
        covariate_names: data.covariate_names.clone(),
        rows,
    };
    let fit = fit_cox(&shuffled, &["x"]).unwrap();
    assert!((fit.coefficients[0] - base.coefficients[0]).abs() < 1e-10);
    assert!((fit.loglik - base.loglik).abs() < 1e-8 * base.loglik.abs());
}

#[test]
fn stage_one_recovers_the_trajectory() {
    let cohort = simulate_cohort(&reference(1000, 21)).unwrap();
    let fit = fit_lmm(&cohort, 1, true).unwrap();
    assert!(fit.converged);
    let se = fit.beta_g_se().unwrap();
    assert!((fit.beta_g().unwrap() - 0.3).abs() < 4.0 * se, "{:?}", fit.fixed_effects);
    assert!((fit.fixed_effects[0] - 8.5).abs() < 0.2);
    assert!((fit.fixed_effects[1] - 0.1).abs() < 0.05);
    assert!((fit.error_var - 0.7).abs() < 0.03, "{}", fit.error_var);
    assert!((fit.random_cov[0] - 2.0).abs() < 0.3, "{:?}", fit.random_cov);
}

#[test]
fn two_stage_pipeline_is_consistent() {
    let cohort = simulate_cohort(&reference(1000, 22)).unwrap();
    let fit = two_stage_test(&cohort, 1).unwrap();
    assert!(fit.cox.converged);
    let i = fit.cox.index("theta_g").unwrap();
    assert!((fit.theta_g() - 0.175).abs() < 4.0 * fit.cox.std_errors[i], "{}", fit.theta_g());
    assert!(fit.cox.loglik_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs()));
    assert_eq!(fit.cox.n_events, cohort.event_count());
    assert!(fit.p_value() > 0.0 && fit.p_value() < 1.0);
}

#[test]
fn naive_fit_sees_the_same_events() {
    let cohort = simulate_cohort(&reference(500, 23)).unwrap();
    let fit = naive_cox(&cohort).unwrap();
    assert_eq!(fit.n_events, cohort.event_count());
    assert_eq!(fit.names, vec!["gamma_g".to_string()]);
}
