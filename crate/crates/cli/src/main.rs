//! `jmpower`: closed-form calculators, cohort simulation, and Monte Carlo
//! validation studies driven by TOML run files.
//!
//! Exit status: 0 on success, 2 for invalid input (nothing is written),
//! 1 for failures after work has started (the manifest is marked `partial`).

mod manifest;
mod presets;

use std::fs::{self, File};
use std::io::BufWriter;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jmpower_core::config::{Analysis, RunConfig};
use jmpower_core::design::{planned_events, planned_subjects};
use jmpower_core::experiments::{
    curve_from_study, retrospective_power, run_cell, table, CellResult, Estimator, StudyResult,
    SweepParameter,
};
use jmpower_core::sim::{simulate_cohort, write_longitudinal, write_survival};
use jmpower_core::{power_given_events, required_events, EffectParameters, Error as CoreError, GeneticDesign};

use manifest::{Manifest, Status};

#[derive(Debug, Parser)]
#[command(name = "jmpower", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Power to detect the overall SNP effect with a given number of events.
    Power {
        #[command(flatten)]
        effect: EffectArgs,
        #[arg(long)]
        maf: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha_level: f64,
        #[arg(long)]
        events: f64,
    },
    /// Events (and optionally subjects) needed for a target power.
    SampleSize {
        #[command(flatten)]
        effect: EffectArgs,
        #[arg(long)]
        maf: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha_level: f64,
        #[arg(long, default_value_t = 0.8)]
        power: f64,
        /// Expected fraction of subjects with an event; adds a subject count.
        #[arg(long)]
        event_rate: Option<f64>,
    },
    /// Simulate one cohort and write its longitudinal and survival records.
    Simulate(RunArgs),
    /// Run the Monte Carlo study of a run file and tabulate it.
    Validate(StudyArgs),
    /// Mean event counts over an `n_subjects` sweep and the power curve they imply.
    Curve(StudyArgs),
    /// Closed-form power at fixed event counts over allele frequencies.
    Retro(RunArgs),
    /// List the built-in run files, or print one.
    Presets {
        name: Option<String>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long, default_value_t = jmpower_service::DEFAULT_MAX_SIM_REPS)]
        max_sim_reps: usize,
    },
}

/// The overall effect, either directly or as `gamma_g + alpha * beta_g`.
#[derive(Debug, Args)]
struct EffectArgs {
    #[arg(long, allow_negative_numbers = true, conflicts_with_all = ["gamma_g", "alpha", "beta_g"])]
    theta: Option<f64>,
    /// Direct SNP effect on the hazard.
    #[arg(long, allow_negative_numbers = true)]
    gamma_g: Option<f64>,
    /// Association between the trajectory and the hazard.
    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// SNP effect on the trajectory.
    #[arg(long, allow_negative_numbers = true)]
    beta_g: Option<f64>,
}

impl EffectArgs {
    fn theta(&self) -> Result<f64, Failure> {
        match (self.theta, self.gamma_g, self.alpha, self.beta_g) {
            (Some(t), ..) => Ok(t),
            (None, Some(gamma_g), Some(alpha), Some(beta_g)) => Ok(EffectParameters { gamma_g, alpha, beta_g }.overall()),
            _ => Err(Failure::input("give --theta, or all of --gamma-g, --alpha and --beta-g")),
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Run file path, or the name of a built-in preset.
    config: String,
    /// Output directory [default: results/<name>].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces the master seed of the run file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct StudyArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Replaces the replicate count of the run file.
    #[arg(long)]
    replicates: Option<usize>,
}

/// A failure and the exit status it maps to.
#[derive(Debug)]
enum Failure {
    Input(String),
    Runtime(anyhow::Error),
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure::Input(message.into())
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Invalid { .. } | CoreError::ZeroEffect | CoreError::MafInfeasible { .. } | CoreError::Config(_) => {
                Failure::Input(e.to_string())
            }
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// The calculators take the minor allele, as the HTTP API does.
fn check_maf(maf: f64) -> Result<(), Failure> {
    if maf > 0.0 && maf <= 0.5 {
        Ok(())
    } else {
        Err(Failure::input(format!("invalid `maf`: must lie in (0, 0.5], got {maf}")))
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Power { effect, maf, alpha_level, events } => {
            check_maf(maf)?;
            let power = power_given_events(maf, alpha_level, effect.theta()?, events)?;
            println!("{power:.4}");
            Ok(())
        }
        Command::SampleSize { effect, maf, alpha_level, power, event_rate } => {
            check_maf(maf)?;
            let theta = effect.theta()?;
            let d = required_events(&GeneticDesign::new(maf, alpha_level, power)?, theta)?;
            println!("events = {d:.4}");
            println!("events_planned = {}", planned_events(d));
            if let Some(rate) = event_rate {
                println!("subjects = {}", planned_subjects(d, rate)?);
            }
            Ok(())
        }
        Command::Simulate(args) => simulate(args),
        Command::Validate(args) => validate(args),
        Command::Curve(args) => curve(args),
        Command::Retro(args) => retro(args),
        Command::Presets { name: None } => {
            for (name, text) in presets::PRESETS {
                let description = RunConfig::from_toml(text).ok().and_then(|c| c.description).unwrap_or_default();
                println!("{name:<10} {description}");
            }
            Ok(())
        }
        Command::Presets { name: Some(name) } => {
            let text = presets::lookup(&name).ok_or_else(|| Failure::input(format!("unknown preset `{name}`")))?;
            print!("{text}");
            Ok(())
        }
        Command::Serve { port, host, max_sim_reps } => {
            let config = jmpower_service::ServiceConfig { max_sim_reps, ..Default::default() };
            let addr = SocketAddr::new(host, port);
            let runtime = tokio::runtime::Runtime::new()?;
            eprintln!("listening on http://{addr}");
            runtime.block_on(jmpower_service::serve(addr, config)).map_err(|e| Failure::Runtime(e.into()))
        }
    }
}

/// A parsed, validated run file with command-line overrides applied.
struct Loaded {
    config: RunConfig,
    name: String,
    out: PathBuf,
    /// Canonical text of the effective configuration, hashed into the manifest.
    effective: String,
}

fn load(args: &RunArgs, replicates: Option<usize>) -> Result<Loaded, Failure> {
    let path = Path::new(&args.config);
    let (text, stem) = if path.exists() {
        let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
        (text, stem)
    } else if let Some(text) = presets::lookup(&args.config) {
        (text.to_string(), args.config.clone())
    } else {
        return Err(Failure::input(format!("`{}` is neither a file nor a preset", args.config)));
    };
    let mut config = RunConfig::from_toml(&text)?;
    if let Some(seed) = args.seed {
        if let Some(sim) = config.sim.as_mut() {
            sim.seed = seed;
        }
    }
    if let Some(reps) = replicates {
        let study = config
            .study
            .as_mut()
            .ok_or_else(|| Failure::input("--replicates needs a [study] section"))?;
        study.replicates = reps;
        config.validate()?;
    }
    let name = config.name.clone().unwrap_or(stem);
    let out = args.out.clone().unwrap_or_else(|| Path::new("results").join(&name));
    let effective = toml::to_string(&config).map_err(|e| Failure::Runtime(e.into()))?;
    Ok(Loaded { config, name, out, effective })
}

fn create_file(path: &Path) -> Result<BufWriter<File>, Failure> {
    let file = File::create(path).map_err(|e| Failure::Runtime(anyhow::anyhow!("cannot create {}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(anyhow::anyhow!("cannot create {}: {e}", dir.display())))
}

fn simulate(args: RunArgs) -> Result<(), Failure> {
    let loaded = load(&args, None)?;
    let sim = loaded.config.sim_config(None)?;
    create_dir(&loaded.out)?;
    let mut manifest = Manifest::new("simulate", &loaded.name, &loaded.effective, Some(sim.seed));
    manifest.cells_total = 1;
    let cohort = match simulate_cohort(&sim) {
        Ok(c) => c,
        Err(e) => return Err(fail_manifest(&loaded.out, manifest, e.into())),
    };
    let longitudinal = "longitudinal.csv";
    let survival = "survival.csv";
    write_longitudinal(create_file(&loaded.out.join(longitudinal))?, &cohort)?;
    write_survival(create_file(&loaded.out.join(survival))?, &cohort)?;
    manifest.cells_completed = 1;
    manifest.outputs = vec![longitudinal.into(), survival.into()];
    manifest.write(&loaded.out)?;
    println!(
        "{} subjects, {} events -> {}",
        cohort.subjects.len(),
        cohort.event_count(),
        loaded.out.display()
    );
    Ok(())
}

/// Marks the manifest partial, writes it, and passes the failure on.
fn fail_manifest(dir: &Path, mut manifest: Manifest, error: anyhow::Error) -> Failure {
    manifest.status = Status::Partial;
    manifest.error = Some(format!("{error:#}"));
    if let Err(e) = manifest.write(dir) {
        eprintln!("warning: could not write manifest: {e:#}");
    }
    Failure::Runtime(error)
}

fn describe(cell: &CellResult) -> String {
    if cell.parameters.is_empty() {
        "base".to_string()
    } else {
        cell.parameters.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
    }
}

fn print_cell(index: usize, total: usize, cell: &CellResult, analysis: Analysis, estimators: &[Estimator]) {
    let mut line = format!(
        "[{}/{}] {}: reps={} failed={} d_bar={:.2}",
        index + 1,
        total,
        describe(cell),
        cell.completed,
        cell.failed,
        cell.d_bar
    );
    match analysis {
        Analysis::Bias => {
            for &e in estimators {
                if let Some(s) = cell.summaries.iter().find(|s| s.estimator == e) {
                    line.push_str(&format!(" {}={:.4}", e.name(), s.mean));
                }
            }
        }
        _ => {
            for p in &cell.power {
                line.push_str(&format!(
                    " {}@{}: empirical={:.3} calculated={:.3}",
                    p.estimator.name(),
                    p.alpha_level,
                    p.empirical,
                    p.calculated
                ));
            }
        }
    }
    println!("{line}");
}

/// Runs every cell in order, stopping at the first failure but keeping
/// the cells already finished.
fn run_cells(loaded: &Loaded, analysis: Analysis) -> Result<(StudyResult, usize, Option<CoreError>), Failure> {
    let spec = loaded.config.study_spec(None)?;
    let cells = spec.resolve_cells()?;
    let mut result = StudyResult {
        master_seed: spec.sim.seed,
        replicates_requested: spec.replicates,
        cells: Vec::with_capacity(cells.len()),
    };
    for (i, cell) in cells.iter().enumerate() {
        match run_cell(cell, spec.replicates, &spec.alpha_levels, &spec.estimators) {
            Ok(r) => {
                print_cell(i, cells.len(), &r, analysis, &spec.estimators);
                result.cells.push(r);
            }
            Err(e) => return Ok((result, cells.len(), Some(e))),
        }
    }
    Ok((result, cells.len(), None))
}

fn finish_study(
    loaded: &Loaded,
    mut manifest: Manifest,
    total: usize,
    result: &StudyResult,
    error: Option<CoreError>,
    write_tables: impl FnOnce(&StudyResult) -> Result<Vec<String>, Failure>,
) -> Result<(), Failure> {
    manifest.cells_total = total;
    manifest.cells_completed = result.cells.len();
    manifest.outputs = write_tables(result)?;
    match error {
        None => {
            manifest.write(&loaded.out)?;
            println!("wrote {}", loaded.out.display());
            Ok(())
        }
        Some(e) => Err(fail_manifest(&loaded.out, manifest, e.into())),
    }
}

fn validate(args: StudyArgs) -> Result<(), Failure> {
    let loaded = load(&args.run, args.replicates)?;
    let analysis = loaded.config.analysis();
    let alpha_levels = loaded.config.study_spec(None)?.alpha_levels;
    let seed = loaded.config.sim.as_ref().map(|s| s.seed);
    // Fail on input errors before anything is created.
    loaded.config.study_spec(None)?.resolve_cells()?;
    create_dir(&loaded.out)?;
    let manifest = Manifest::new("validate", &loaded.name, &loaded.effective, seed);
    let (result, total, error) = run_cells(&loaded, analysis)?;
    let file = format!("{}.csv", loaded.name);
    finish_study(&loaded, manifest, total, &result, error, |result| {
        let out = create_file(&loaded.out.join(&file))?;
        match analysis {
            Analysis::Events => table::write_events_table(out, result, &alpha_levels)?,
            _ => table::write_study_table(out, result)?,
        }
        Ok(vec![file.clone()])
    })
}

fn curve(args: StudyArgs) -> Result<(), Failure> {
    let mut loaded = load(&args.run, args.replicates)?;
    let swept = loaded.config.sweep.as_ref().map(|s| s.parameter);
    if swept != Some(SweepParameter::NSubjects) {
        return Err(Failure::input("curve needs a [sweep] over `n_subjects`"));
    }
    // Only event counts are needed; skip the estimators.
    if let Some(study) = loaded.config.study.as_mut() {
        study.analysis = Analysis::Events;
        study.estimators = None;
    }
    let alpha_levels = loaded.config.study_spec(None)?.alpha_levels;
    loaded.config.study_spec(None)?.resolve_cells()?;
    let seed = loaded.config.sim.as_ref().map(|s| s.seed);
    create_dir(&loaded.out)?;
    let manifest = Manifest::new("curve", &loaded.name, &loaded.effective, seed);
    let (result, total, error) = run_cells(&loaded, Analysis::Events)?;
    let curve_file = format!("{}_curve.csv", loaded.name);
    let events_file = format!("{}_events.csv", loaded.name);
    finish_study(&loaded, manifest, total, &result, error, |result| {
        let mut series = Vec::new();
        for &a in &alpha_levels {
            series.extend(curve_from_study(result, a)?);
        }
        table::write_curve_table(create_file(&loaded.out.join(&curve_file))?, &series)?;
        table::write_events_table(create_file(&loaded.out.join(&events_file))?, result, &alpha_levels)?;
        Ok(vec![curve_file.clone(), events_file.clone()])
    })
}

fn retro(args: RunArgs) -> Result<(), Failure> {
    let loaded = load(&args, None)?;
    let retro = loaded
        .config
        .retro
        .clone()
        .ok_or_else(|| Failure::input("retro needs a [retro] section"))?;
    let mut rows = Vec::new();
    for &events in &retro.events {
        for point in retrospective_power(events, retro.theta, &retro.maf, &retro.alpha_levels)? {
            rows.push((events, point));
        }
    }
    create_dir(&loaded.out)?;
    let mut manifest = Manifest::new("retro", &loaded.name, &loaded.effective, None);
    let file = format!("{}.csv", loaded.name);
    table::write_retro_table(create_file(&loaded.out.join(&file))?, retro.theta, &rows)?;
    for &events in &retro.events {
        for &a in &retro.alpha_levels {
            let reached = rows
                .iter()
                .filter(|(d, p)| *d == events && p.alpha_level == a && p.power >= 0.8)
                .map(|(_, p)| p.maf)
                .fold(f64::INFINITY, f64::min);
            let reached = if reached.is_finite() { format!("{reached}") } else { "none".into() };
            println!("events={events} alpha_level={a}: smallest maf on grid with power >= 0.8: {reached}");
        }
    }
    manifest.cells_total = retro.events.len();
    manifest.cells_completed = retro.events.len();
    manifest.outputs = vec![file];
    manifest.write(&loaded.out)?;
    println!("wrote {}", loaded.out.display());
    Ok(())
}
