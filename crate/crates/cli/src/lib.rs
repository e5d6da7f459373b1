//! Command-line front end: argument parsing, config merging and the
//! subcommands. Exit codes: 0 pass, 1 quantitative failure, 2 usage error.

pub mod config;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::{json, Value};
use stirsim::acceptance::{self, AcceptanceConfig};
use stirsim::dynamics::{run_batch, write_paths_csv, ReplicaOutput, ReplicaSpec};
use stirsim::estimators::{ensemble_covariance, hurst_fit_ensemble};
use stirsim::kernels::{self, QuadratureSpec, TorusKernel};
use stirsim::lattice::Torus;
use stirsim::rng::{replica_rng, DEFAULT_SEED};
use stirsim::state::{sample_stationary, ModelParams};
use stirsim::theory::{self, matrix_a, matrix_sqrt, LimitSpec};
use stirsim::tracer::{self, TracerState};

pub use config::{ExperimentConfig, FieldError, OUTPUT_ENV};

#[derive(Debug, Parser)]
#[command(name = "stirsim", version, about = "Multi-species stirring process simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw one configuration from the product stationary measure.
    SampleStationary(ConfigArgs),
    /// Simulate replicas and write their occupation paths.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Rescaled occupation covariances against the scaling limit.
    OccupationExperiment {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Relative tolerance on the final variance; 10%, 20%, 15% for d = 1, 2, >= 3.
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Backward tracer law, duality and collision checks.
    TracerCheck {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Trace time.
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Start site index.
        #[arg(long, default_value_t = 0)]
        site: usize,
        /// Start slot, 1-based.
        #[arg(long, default_value_t = 1)]
        slot: usize,
        /// Labelled histories used for the duality check.
        #[arg(long, default_value_t = 20)]
        histories: usize,
        #[arg(long, default_value_t = 0.01)]
        tv_threshold: f64,
    },
    /// Evaluate heat kernels at one time and displacement.
    KernelEval {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long)]
        t: f64,
        /// Displacement, comma separated; the origin when absent.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x: Option<Vec<i64>>,
        /// Also evaluate the kernel on the torus of this side.
        #[arg(long = "L")]
        side: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the covariance matrix, its square root and limit prefactors.
    TheoryConstants {
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        p: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tiny-system suite: simulator and closed forms against exact generators.
    OracleCompare {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run acceptance criteria A1..A11.
    Acceptance {
        /// Only the oracle, kernel and theory criteria.
        #[arg(long)]
        quick: bool,
        /// Comma-separated criterion ids, e.g. A3,A8.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<String>>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Experiment flags; each overrides the matching key of `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Flat JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long = "L")]
    pub side: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
    #[arg(long = "N")]
    pub n: Option<f64>,
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[arg(long)]
    pub octaves: Option<usize>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; also settable through STIRSIM_OUTPUT_DIR.
    #[arg(long = "out")]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub record_events: bool,
    #[arg(long)]
    pub record_snapshots: bool,
    /// Print the merged config as JSON and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Clone, Copy, Default, Args)]
pub struct RunArgs {
    /// Worker threads for replica batches; defaults to all cores.
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl RunArgs {
    fn jobs(&self) -> usize {
        self.jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<stirsim::Error> for CliError {
    fn from(e: stirsim::Error) -> Self {
        match e {
            stirsim::Error::Usage(_) | stirsim::Error::InvalidParameter(_) => CliError::Usage(e.to_string()),
            stirsim::Error::Replica { ref source, .. }
                if matches!(**source, stirsim::Error::Usage(_) | stirsim::Error::InvalidParameter(_)) =>
            {
                CliError::Usage(e.to_string())
            }
            other => CliError::Failure(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Whether the quantitative checks of a command passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

pub fn exit_code(result: &CliResult<Outcome>) -> i32 {
    match result {
        Ok(Outcome::Pass) => 0,
        Ok(Outcome::Fail) | Err(CliError::Failure(_)) => 1,
        Err(CliError::Usage(_)) => 2,
    }
}

impl ConfigArgs {
    /// File (or defaults), then the output-directory variable, then flags.
    pub fn merge(&self) -> CliResult<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(dir) = std::env::var_os(OUTPUT_ENV) {
            c.output_dir = PathBuf::from(dir);
        }
        macro_rules! take {
            ($($f:ident),*) => {$(if let Some(v) = &self.$f { c.$f = v.clone(); })*};
        }
        take!(d, side, k, p, n, horizon, octaves, replicas, seed, output_dir);
        if self.l.is_some() {
            c.l = self.l;
        }
        if self.grid.is_some() {
            c.grid = self.grid.clone();
        }
        c.record_events |= self.record_events;
        c.record_snapshots |= self.record_snapshots;
        c.validate()?;
        Ok(c)
    }
}

fn output_dir(flag: &Option<PathBuf>) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("stirsim-out"))
}

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes `summary.json`-style files; the only place a timestamp appears.
fn write_json(dir: &Path, name: &str, mut value: Value) -> CliResult<()> {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    value["created_unix"] = json!(now);
    let mut out = create(dir, name)?;
    serde_json::to_writer_pretty(&mut out, &value).map_err(|e| CliError::Failure(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

fn specs_for(c: &ExperimentConfig, sim_grid: &[f64]) -> CliResult<Vec<ReplicaSpec>> {
    let torus = c.torus()?;
    let params = c.params()?;
    Ok((0..c.replicas as u64)
        .map(|r| {
            let mut s = ReplicaSpec::new(torus.clone(), params.clone(), c.horizon * c.n, sim_grid.to_vec(), c.seed, r);
            s.record_events = c.record_events;
            s.record_snapshots = c.record_snapshots;
            s
        })
        .collect())
}

fn simulate_config(c: &ExperimentConfig, jobs: usize) -> CliResult<(Vec<f64>, Vec<ReplicaOutput>)> {
    let scaled = c.scaled_grid()?;
    let sim_grid: Vec<f64> = scaled.iter().map(|t| t * c.n).collect();
    info!(
        "simulating {} replicas on d={} L={} k={} up to t={}",
        c.replicas,
        c.d,
        c.side,
        c.k,
        c.horizon * c.n
    );
    let outputs = run_batch(&specs_for(c, &sim_grid)?, jobs)?;
    for o in &outputs {
        info!("replica {} done: {} events", o.replica, o.clock.events);
    }
    Ok((scaled, outputs))
}

pub fn run(cli: Cli) -> CliResult<Outcome> {
    match cli.command {
        Command::SampleStationary(args) => sample_stationary_cmd(&args),
        Command::Simulate { config, run } => simulate_cmd(&config, run),
        Command::OccupationExperiment { config, run, tolerance } => occupation_cmd(&config, run, tolerance),
        Command::TracerCheck {
            config,
            run,
            t,
            site,
            slot,
            histories,
            tv_threshold,
        } => tracer_cmd(&config, run, t, site, slot, histories, tv_threshold),
        Command::KernelEval { d, k, t, x, side, out } => kernel_cmd(d, k, t, x, side, &out),
        Command::TheoryConstants { d, k, p, out } => theory_cmd(d, k, p, &out),
        Command::OracleCompare { seed, run, out } => oracle_cmd(seed, run, &out),
        Command::Acceptance {
            quick,
            only,
            seed,
            run,
            out,
        } => acceptance_cmd(quick, only, seed, run, &out),
    }
}

fn print_config(c: &ExperimentConfig) -> Outcome {
    println!("{}", c.to_json());
    Outcome::Pass
}

fn sample_stationary_cmd(args: &ConfigArgs) -> CliResult<Outcome> {
    let c = args.merge()?;
    if args.print_config {
        return Ok(print_config(&c));
    }
    let torus = c.torus()?;
    let params = c.params()?;
    let mut rng = replica_rng(c.seed, 0);
    let counts = sample_stationary(&params, &torus, &mut rng).project(params.labels());
    let mut out = create(&c.output_dir, "stationary.txt")?;
    counts.write_text(&mut out)?;
    out.flush()?;
    let sites = torus.site_count() as f64;
    let species: Vec<Value> = (0..params.labels())
        .map(|j| {
            let p = if j < params.species() { params.density(j) } else { params.untracked_density() };
            json!({"species": j + 1, "total": counts.total(j), "expected": sites * c.k as f64 * p})
        })
        .collect();
    for s in &species {
        println!("species {} total {} (expected {})", s["species"], s["total"], s["expected"]);
    }
    write_json(&c.output_dir, "summary.json", json!({"command": "sample-stationary", "config": c, "species": species}))?;
    Ok(Outcome::Pass)
}

fn simulate_cmd(args: &ConfigArgs, run: RunArgs) -> CliResult<Outcome> {
    let c = args.merge()?;
    if args.print_config {
        return Ok(print_config(&c));
    }
    let (_, outputs) = simulate_config(&c, run.jobs())?;
    let mut out = create(&c.output_dir, "paths.csv")?;
    write_paths_csv(&mut out, &outputs)?;
    out.flush()?;
    if c.record_events {
        for o in &outputs {
            let mut f = create(&c.output_dir, &format!("events_{}.csv", o.replica))?;
            o.events.as_ref().expect("events recorded").write_csv(&mut f)?;
            f.flush()?;
        }
    }
    let events: u64 = outputs.iter().map(|o| o.clock.events).sum();
    println!(
        "{} replicas, {} events, paths written to {}",
        outputs.len(),
        events,
        c.output_dir.join("paths.csv").display()
    );
    write_json(&c.output_dir, "summary.json", json!({"command": "simulate", "config": c, "events": events}))?;
    Ok(Outcome::Pass)
}

fn default_tolerance(d: usize) -> f64 {
    match d {
        1 => 0.10,
        2 => 0.20,
        _ => 0.15,
    }
}

fn occupation_cmd(args: &ConfigArgs, run: RunArgs, tolerance: Option<f64>) -> CliResult<Outcome> {
    let c = args.merge()?;
    if args.print_config {
        return Ok(print_config(&c));
    }
    if c.replicas < stirsim::estimators::MIN_ENSEMBLE {
        return Err(CliError::Usage(format!(
            "invalid config field `replicas`: covariance estimates need at least {}",
            stirsim::estimators::MIN_ENSEMBLE
        )));
    }
    let params = c.params()?;
    let h = theory::h_scaling(c.d, c.n)?;
    let (scaled, outputs) = simulate_config(&c, run.jobs())?;
    let paths: Vec<_> = outputs.iter().map(|o| &o.path).collect();
    let mut stats = ensemble_covariance(&paths, h)?;
    stats.times = std::iter::once(0.0).chain(scaled.iter().copied()).collect();
    let mut out = create(&c.output_dir, "covariances.csv")?;
    stats.write_csv(&mut out)?;
    out.flush()?;

    let green = if c.d >= 3 {
        Some(kernels::green_constant(c.d, &QuadratureSpec::default())?)
    } else {
        None
    };
    let last = stats.times.len() - 1;
    let t = stats.times[last];
    let tol = tolerance.unwrap_or_else(|| default_tolerance(c.d));
    let mut pass = !stats.degenerate;
    let mut species = Vec::new();
    for j in 0..params.species() {
        let limit = theory::limit_covariance(c.d, &params, t, t, j, j, green)?;
        let var = stats.cov[last][j][j];
        let rel = (var - limit).abs() / limit;
        pass &= rel <= tol;
        let mut entry = json!({
            "species": j + 1, "variance": var, "se": stats.se[last][j][j],
            "limit": limit, "relative_error": rel,
        });
        if c.d == 1 {
            let fit = hurst_fit_ensemble(&paths, j)?;
            pass &= (1.42..=1.58).contains(&fit.slope);
            entry["hurst_slope"] = json!(fit.slope);
            entry["hurst_slope_se"] = json!(fit.slope_se);
            println!(
                "species {}: Var/h^2 = {:.5} +- {:.5}, limit {:.5}, rel {:.1}%, Hurst slope {:.3}",
                j + 1,
                var,
                stats.se[last][j][j],
                limit,
                100.0 * rel,
                fit.slope
            );
        } else {
            println!(
                "species {}: Var/h^2 = {:.5} +- {:.5}, limit {:.5}, rel {:.1}%",
                j + 1,
                var,
                stats.se[last][j][j],
                limit,
                100.0 * rel
            );
        }
        species.push(entry);
    }
    println!("{}", if pass { "PASS" } else { "FAIL" });
    write_json(
        &c.output_dir,
        "summary.json",
        json!({"command": "occupation-experiment", "config": c, "tolerance": tol, "pass": pass, "species": species}),
    )?;
    Ok(Outcome::from_pass(pass))
}

fn tracer_cmd(
    args: &ConfigArgs,
    run: RunArgs,
    t: f64,
    site: usize,
    slot: usize,
    histories: usize,
    tv_threshold: f64,
) -> CliResult<Outcome> {
    let c = args.merge()?;
    if args.print_config {
        return Ok(print_config(&c));
    }
    let torus = c.torus()?;
    let params = c.params()?;
    if site >= torus.site_count() || slot == 0 || slot > c.k {
        return Err(CliError::Usage(format!(
            "start ({site}, {slot}) outside sites 0..{} and slots 1..={}",
            torus.site_count(),
            c.k
        )));
    }
    if !(t > 0.0) {
        return Err(CliError::Usage(format!("trace time must be positive, got {t}")));
    }
    let start = TracerState { site, slot: slot - 1 };
    let marginal = tracer::tracer_marginal_check(&torus, c.k, t, start, c.replicas, c.seed)?;
    let mut out = create(&c.output_dir, "tracer_marginal.csv")?;
    writeln!(out, "# schema=v1")?;
    writeln!(out, "site,empirical,exact")?;
    for (z, (e, q)) in marginal.empirical.iter().zip(&marginal.exact).enumerate() {
        writeln!(out, "{z},{e},{q}")?;
    }
    out.flush()?;

    let specs: Vec<ReplicaSpec> = (0..histories as u64)
        .map(|r| {
            let mut s = ReplicaSpec::new(torus.clone(), params.clone(), t, vec![], c.seed, r);
            s.record_events = true;
            s
        })
        .collect();
    let targets: Vec<TracerState> = (0..torus.site_count())
        .flat_map(|x| (0..c.k).map(move |m| TracerState { site: x, slot: m }))
        .collect();
    let mut violations = 0;
    let mut collisions = 0;
    for o in run_batch(&specs, run.jobs())? {
        let log = o.events.as_ref().expect("events recorded");
        violations += tracer::duality_violations(log, &o.initial, &o.final_state, t, &targets)?;
        if !tracer::collision_free(&tracer::trace_back(log, t, &targets)?) {
            collisions += 1;
        }
    }
    let pass = marginal.total_variation < tv_threshold && marginal.slot_max_z < 4.0 && violations == 0 && collisions == 0;
    println!(
        "TV {:.5} (threshold {tv_threshold}), slot max z {:.2}, duality violations {violations} over {} pairs, collisions {collisions}",
        marginal.total_variation,
        marginal.slot_max_z,
        histories * targets.len()
    );
    println!("{}", if pass { "PASS" } else { "FAIL" });
    write_json(
        &c.output_dir,
        "summary.json",
        json!({
            "command": "tracer-check", "config": c, "t": t, "start": {"site": site, "slot": slot},
            "total_variation": marginal.total_variation, "tv_threshold": tv_threshold,
            "slot_empirical": marginal.slot_empirical, "slot_exact": marginal.slot_exact,
            "slot_max_z": marginal.slot_max_z, "duality_violations": violations,
            "histories_with_collisions": collisions, "pass": pass,
        }),
    )?;
    Ok(Outcome::from_pass(pass))
}

fn kernel_cmd(d: usize, k: usize, t: f64, x: Option<Vec<i64>>, side: Option<usize>, out: &Option<PathBuf>) -> CliResult<Outcome> {
    if d == 0 || k == 0 {
        return Err(CliError::Usage("d and k must be at least 1".into()));
    }
    if !(t >= 0.0) {
        return Err(CliError::Usage(format!("t must be non-negative, got {t}")));
    }
    let x = x.unwrap_or_else(|| vec![0; d]);
    if x.len() != d {
        return Err(CliError::Usage(format!("displacement has {} coordinates, expected {d}", x.len())));
    }
    let spec = QuadratureSpec::default();
    let mut value = json!({
        "d": d, "k": k, "t": t, "x": x,
        "q": kernels::q(t, &x),
        "qhat": kernels::qhat(k, t, &x),
        "v": kernels::v(k, t, &x, &spec)?,
        "lag_weighted_integral": kernels::lag_weighted_integral(d, k, t, &spec)?,
    });
    if d >= 3 {
        value["green_constant"] = json!(kernels::green_constant(d, &spec)?);
    }
    if let Some(side) = side {
        let torus = Torus::new(d, side)?;
        let coords: Vec<usize> = x.iter().map(|&c| c.rem_euclid(side as i64) as usize).collect();
        value["L"] = json!(side);
        value["qhat_torus"] = json!(TorusKernel::new(&torus, k).at(t, &coords));
    }
    println!("{}", serde_json::to_string_pretty(&value).expect("json"));
    write_json(&output_dir(out), "kernel.json", value)?;
    Ok(Outcome::Pass)
}

fn theory_cmd(d: usize, k: usize, p: Vec<f64>, out: &Option<PathBuf>) -> CliResult<Outcome> {
    if d == 0 {
        return Err(CliError::Usage("d must be at least 1".into()));
    }
    let params = ModelParams::new(k, p)?;
    let green = if d >= 3 {
        Some(kernels::green_constant(d, &QuadratureSpec::default())?)
    } else {
        None
    };
    let spec = LimitSpec::new(d, &params, green)?;
    let a = matrix_a(&params);
    let root = matrix_sqrt(&a)?;
    let variances: Vec<f64> = (0..params.species())
        .map(|j| theory::limit_covariance(d, &params, 1.0, 1.0, j, j, green))
        .collect::<stirsim::Result<_>>()?;
    let value = json!({
        "d": d, "k": k, "p": params.densities(),
        "regime": spec.regime, "process": spec.process,
        "A": a.rows(), "A_sqrt": root.rows(),
        "prefactor": spec.prefactor,
        "green_constant": green,
        "variance_at_1": variances,
    });
    println!("{}", serde_json::to_string_pretty(&value).expect("json"));
    write_json(&output_dir(out), "theory.json", value)?;
    Ok(Outcome::Pass)
}

fn oracle_cmd(seed: u64, run: RunArgs, out: &Option<PathBuf>) -> CliResult<Outcome> {
    let cfg = AcceptanceConfig { seed, jobs: run.jobs() };
    let mut reports = Vec::new();
    for id in ["A1", "A2"] {
        let r = acceptance::run(id, &cfg)?;
        println!("{}", r.line());
        reports.push(r);
    }
    // Occupation covariance from the generator against the spectral formula.
    let torus = Torus::new(1, 3)?;
    let params = ModelParams::new(2, vec![0.3, 0.2])?;
    let (space, gen) = stirsim::oracle::build_generator(&torus, &params)?;
    let pi = space.stationary(&params);
    let mut worst = 0.0f64;
    for (s, t, j1, j2) in [(0.5, 1.0, 0, 0), (1.0, 2.0, 0, 1), (2.0, 2.0, 1, 1)] {
        let small = stirsim::oracle::exact_occupation_cov_small(&space, &gen, &pi, s, t, j1, j2)?;
        let spectral = theory::exact_occupation_cov(
            1,
            &params,
            s,
            t,
            j1,
            j2,
            theory::Geometry::Torus(&torus),
            &QuadratureSpec::default(),
        )?;
        worst = worst.max((small - spectral).abs());
    }
    let cov_pass = worst <= 1e-6;
    println!(
        "{} occupation covariance: generator vs spectral max difference {worst:.2e} (tolerance 1e-6)",
        if cov_pass { "PASS" } else { "FAIL" }
    );
    let pass = cov_pass && reports.iter().all(|r| r.pass);
    write_json(
        &output_dir(out),
        "oracle.json",
        json!({"command": "oracle-compare", "criteria": reports, "occupation_cov_max_diff": worst, "pass": pass}),
    )?;
    Ok(Outcome::from_pass(pass))
}

fn acceptance_cmd(quick: bool, only: Option<Vec<String>>, seed: u64, run: RunArgs, out: &Option<PathBuf>) -> CliResult<Outcome> {
    let ids: Vec<String> = match only {
        Some(list) => list,
        None if quick => acceptance::QUICK.iter().map(|s| s.to_string()).collect(),
        None => acceptance::ALL.iter().map(|s| s.to_string()).collect(),
    };
    let cfg = AcceptanceConfig { seed, jobs: run.jobs() };
    let mut reports = Vec::new();
    for id in &ids {
        let r = acceptance::run(id, &cfg)?;
        println!("{}", r.line());
        reports.push(r);
    }
    let passed = reports.iter().filter(|r| r.pass).count();
    println!("acceptance: {passed} of {} criteria passed", reports.len());
    let pass = passed == reports.len();
    write_json(
        &output_dir(out),
        "acceptance.json",
        json!({"command": "acceptance", "seed": seed, "criteria": reports, "pass": pass}),
    )?;
    Ok(Outcome::from_pass(pass))
}
