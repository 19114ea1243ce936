use std::path::Path;
use std::process::{Command, Output};

fn jmpower(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jmpower")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn power_from_components() {
    let o = jmpower(&["power", "--maf", "0.3", "--gamma-g", "0.1", "--alpha", "0.25", "--beta-g", "0.3", "--events", "610.21"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "0.8000");
}

#[test]
fn null_effect_power_is_half_alpha() {
    let o = jmpower(&["power", "--maf", "0.3", "--theta", "0", "--events", "500"]);
    assert_eq!(stdout(&o).trim(), "0.0250");
}

#[test]
fn stringent_level_power() {
    let o = jmpower(&["power", "--maf", "0.3", "--theta", "0.25", "--alpha-level", "1e-8", "--events", "601.64"]);
    let p: f64 = stdout(&o).trim().parse().unwrap();
    assert!((p - 0.039).abs() < 0.001, "{p}");
}

#[test]
fn negative_effect_is_accepted() {
    let o = jmpower(&["power", "--maf", "0.3", "--theta", "-0.175", "--events", "610.21"]);
    assert_eq!(stdout(&o).trim(), "0.8000");
}

#[test]
fn sample_size_with_event_rate() {
    let o = jmpower(&["sample-size", "--maf", "0.3", "--theta", "0.175", "--event-rate", "0.61"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let d: f64 = text.lines().next().unwrap().trim_start_matches("events = ").parse().unwrap();
    assert!((d - 610.2).abs() < 0.05, "{text}");
    assert!(text.contains("events_planned = 611"), "{text}");
    assert!(text.contains("subjects = 1001"), "{text}");
}

#[test]
fn invalid_inputs_exit_2() {
    let o = jmpower(&["sample-size", "--maf", "0.3", "--theta", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nonzero"));

    let o = jmpower(&["power", "--maf", "0.7", "--theta", "0.2", "--events", "100"]);
    assert_eq!(o.status.code(), Some(2));

    let o = jmpower(&["power", "--maf", "0.3", "--gamma-g", "0.1", "--events", "100"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_config_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "schema = \"jmpower/v1\"\n[sim]\nn_subjects = 10\nbogus = 1\n").unwrap();
    let out = dir.path().join("out");
    let o = jmpower(&["validate", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
    assert!(!out.exists());

    let o = jmpower(&["validate", "no-such-preset", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn curve_preset_with_few_replicates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f1");
    let o = jmpower(&["curve", "figure1", "--replicates", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&out.join("figure1_curve.csv"));
    assert_eq!(rows.len(), 1 + 3 * 10);
    let manifest = std::fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("status = \"complete\""), "{manifest}");
    assert!(manifest.contains("cells_completed = 30"), "{manifest}");
    assert!(manifest.contains("master_seed = 2001"), "{manifest}");
}

#[test]
fn retro_preset_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = jmpower(&["retro", "figure4", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let rows = csv_rows(&dir.path().join("figure4.csv"));
    assert_eq!(rows[0], ["events", "theta", "alpha_level", "maf", "power_calculated"]);
    assert_eq!(rows.len(), 1 + 2 * 3 * 19);
}

#[test]
fn simulate_is_reproducible_and_hash_tracks_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = jmpower(&["simulate", "simulate", "--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        out
    };
    let (a, b, c) = (run("a", "5"), run("b", "5"), run("c", "6"));
    let read = |p: &Path| std::fs::read_to_string(p.join("survival.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    let hash = |p: &Path| {
        let m: toml::Table = std::fs::read_to_string(p.join("manifest.toml")).unwrap().parse().unwrap();
        m["spec_sha256"].as_str().unwrap().to_string()
    };
    assert_eq!(hash(&a), hash(&b));
    assert_ne!(hash(&a), hash(&c));
    assert_eq!(csv_rows(&a.join("survival.csv")).len(), 1001);
}

#[test]
fn validate_writes_study_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(
        &cfg,
        r#"schema = "jmpower/v1"
[sim]
n_subjects = 150
maf = 0.3
seed = 3
trajectory = { fixed = [8.5, 0.1], beta_g = 0.3, random_cov = [[2.0, -0.1], [-0.1, 0.1]], error_var = 0.7 }
hazard = { lambda = 0.01, shape = 1.1, gamma_g = 0.1, alpha = 0.25 }
grid = { scenario = "S1", max_followup = 10.0 }
[study]
replicates = 3
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = jmpower(&["validate", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("[1/1]"));
    let rows = csv_rows(&out.join("small.csv"));
    assert!(rows[0].contains(&"power_empirical".to_string()));
    assert!(rows.len() > 1);
}

#[test]
fn serve_reports_busy_port() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port().to_string();
    let o = jmpower(&["serve", "--port", &port]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot bind"));
}
