use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use csmt::cli_io::{
    run_analysis, run_simulation, write_analysis, write_human_table, write_rate_table, write_simulation_outputs,
    AnalysisConfig, ColumnRoles, KSetting, OutputFormat, Preset, SimulationConfig, SimulationDocument,
    SimulationOverrides,
};
use csmt::medtests::{Method, WeightScheme};
use csmt::simulate::calibration::{calibrate_sobel, calibrate_studentized};
use csmt::simulate::{ExperimentKind, NullMixture, PowerScenario, SimulationParams};
use csmt::{Error, RandomSource, Result};

#[derive(Parser)]
#[command(name = "csmt", version, about = "Mediation tests under a composite null")]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test every mediator/outcome pair of a CSV file.
    Test(TestArgs),
    /// Empirical size or power studies.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Monte Carlo checks of the limiting null laws.
    #[command(subcommand)]
    Calibrate(CalibrateCommand),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Subsamples per partition, or `auto`.
    #[arg(long)]
    k: Option<KSetting>,
    /// Partitions combined by CSMT.
    #[arg(long)]
    m: Option<usize>,
    /// Nominal level.
    #[arg(long)]
    level: Option<f64>,
    /// Comma-separated methods: csmt, subsampling_t, sobel, maxp.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Output file, or directory for `simulate`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Replication preset: paper (500 tests, M = 500) or ci (100 tests, M = 100).
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Use equal Cauchy weights instead of random ones.
    #[arg(long)]
    equal_weights: bool,
}

impl Common {
    fn weights(&self) -> Option<WeightScheme> {
        self.equal_weights.then_some(WeightScheme::Equal)
    }
}

#[derive(Args)]
struct TestArgs {
    /// Analysis document (TOML or JSON); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    exposure: Option<String>,
    #[arg(long, value_delimiter = ',')]
    mediators: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    outcomes: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum SimulateCommand {
    /// Size under a null mixture.
    Size(SizeArgs),
    /// Power over an (alpha, beta) grid.
    Power(PowerArgs),
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MixtureName {
    Dense,
    Sparse,
}

#[derive(Args)]
struct StudyArgs {
    /// Simulation document (TOML or JSON); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sample size; several values run a sweep.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Tests (replications) per study point.
    #[arg(long)]
    n_tests: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SizeArgs {
    #[command(flatten)]
    study: StudyArgs,
    /// Null mixture: dense (0.4, 0.3, 0.3) or sparse (0.8, 0.1, 0.1).
    #[arg(long, value_enum, requires = "r")]
    mixture: Option<MixtureName>,
    /// Signal magnitude of the nonzero coefficient.
    #[arg(long)]
    r: Option<f64>,
}

#[derive(Args)]
struct PowerArgs {
    #[command(flatten)]
    study: StudyArgs,
    /// Common values of alpha = beta.
    #[arg(long, value_delimiter = ',', conflicts_with = "ratios")]
    values: Option<Vec<f64>>,
    /// Ratios alpha / beta at a fixed product.
    #[arg(long, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
    /// Product alpha * beta; defaults by n (100: 0.3, 200: 0.2, 300: 0.1).
    #[arg(long, requires = "ratios")]
    product: Option<f64>,
}

#[derive(Subcommand)]
enum CalibrateCommand {
    /// Sobel statistic against its normal limit under a null (alpha, beta).
    Sobel(SobelCalArgs),
    /// Studentized statistic of K i.i.d. normals against t with K - 1 df.
    Studentized(StudentizedCalArgs),
}

#[derive(Args)]
struct SobelCalArgs {
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = 600)]
    n: usize,
    /// Replications; defaults to 2000 (paper) or 500 (ci).
    #[arg(long)]
    reps: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct StudentizedCalArgs {
    /// Variance of the injected normals.
    #[arg(long, default_value_t = 1.0)]
    variance: f64,
    /// Draws; defaults to 100000 (paper) or 20000 (ci).
    #[arg(long)]
    draws: Option<usize>,
    #[command(flatten)]
    common: Common,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default_level)).init();
    match run(cli.command) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(code)) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<Option<i32>> {
    match command {
        Command::Test(args) => run_test(args),
        Command::Simulate(SimulateCommand::Size(args)) => {
            let mixture = args.mixture.map(|m| match m {
                MixtureName::Dense => NullMixture::dense(args.r.unwrap_or_default()),
                MixtureName::Sparse => NullMixture::sparse(args.r.unwrap_or_default()),
            });
            run_study(ExperimentKind::Size, args.study, mixture, None).map(|()| None)
        }
        Command::Simulate(SimulateCommand::Power(args)) => {
            let power = match (args.values, args.ratios) {
                (Some(values), _) => Some(PowerScenario::FixedEqual { values }),
                (None, Some(ratios)) => Some(PowerScenario::FixedProduct {
                    ratios,
                    product: args.product,
                }),
                (None, None) => None,
            };
            run_study(ExperimentKind::Power, args.study, None, power).map(|()| None)
        }
        Command::Calibrate(CalibrateCommand::Sobel(args)) => {
            let c = &args.common;
            let reps = args.reps.unwrap_or(match c.preset {
                Some(Preset::Ci) => 500,
                _ => 2000,
            });
            let params = SimulationParams::new(args.alpha, args.beta, args.n);
            let cal = calibrate_sobel(&params, reps, c.level.unwrap_or(0.05), &source(c))?;
            emit_record(c, &cal).map(|()| None)
        }
        Command::Calibrate(CalibrateCommand::Studentized(args)) => {
            let c = &args.common;
            let k = match c.k {
                Some(KSetting::Fixed(k)) => k,
                _ => 12,
            };
            let draws = args.draws.unwrap_or(match c.preset {
                Some(Preset::Ci) => 20_000,
                _ => 100_000,
            });
            let cal = calibrate_studentized(k, args.variance, draws, &source(c))?;
            emit_record(c, &cal).map(|()| None)
        }
    }
}

fn source(c: &Common) -> RandomSource {
    RandomSource::new(c.seed.unwrap_or(1))
}

/// Returns the exit code of the first per-pair failure, if any.
fn run_test(args: TestArgs) -> Result<Option<i32>> {
    let c = args.common;
    let mut cfg = match &args.config {
        Some(path) => AnalysisConfig::load(path)?,
        None => {
            let missing = |flag: &str| Error::Config {
                path: String::new(),
                message: format!("--{flag} is required without --config"),
            };
            let roles = ColumnRoles {
                exposure: args.exposure.clone().ok_or_else(|| missing("exposure"))?,
                mediators: args.mediators.clone().ok_or_else(|| missing("mediators"))?,
                outcomes: args.outcomes.clone().ok_or_else(|| missing("outcomes"))?,
                covariates: args.covariates.clone().unwrap_or_default(),
            };
            AnalysisConfig::new(args.input.clone().ok_or_else(|| missing("input"))?, roles)
        }
    };
    if let Some(v) = args.input {
        cfg.input = v;
    }
    if let Some(v) = args.exposure {
        cfg.roles.exposure = v;
    }
    if let Some(v) = args.mediators {
        cfg.roles.mediators = v;
    }
    if let Some(v) = args.outcomes {
        cfg.roles.outcomes = v;
    }
    if let Some(v) = args.covariates {
        cfg.roles.covariates = v;
    }
    if let Some(p) = c.preset {
        cfg.m = p.m();
    }
    if let Some(v) = c.seed {
        cfg.seed = v;
    }
    if let Some(v) = c.k {
        cfg.k = v;
    }
    if let Some(v) = c.m {
        cfg.m = v;
    }
    if let Some(v) = c.level {
        cfg.level = v;
    }
    if let Some(v) = c.methods.clone() {
        cfg.methods = v;
    }
    if let Some(v) = c.weights() {
        cfg.weights = v;
    }
    if let Some(v) = c.out.clone() {
        cfg.out = Some(v);
    }
    if let Some(v) = c.format {
        cfg.format = v;
    }

    let rows = run_analysis(&cfg)?;
    match &cfg.out {
        Some(path) => {
            let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
            write_analysis(&rows, &cfg, &mut w)?;
            w.flush()?;
            write_human_table(&rows, &cfg.methods, std::io::stdout().lock())?;
        }
        None => {
            write_analysis(&rows, &cfg, std::io::stdout().lock())?;
            write_human_table(&rows, &cfg.methods, std::io::stderr().lock())?;
        }
    }
    // Every row is written; the exit status still reports the first failure.
    let failed = rows.iter().filter(|r| r.first_failure().is_some()).count();
    Ok(rows.iter().find_map(|r| r.first_failure()).map(|kind| {
        eprintln!("{failed} of {} pairs had failures", rows.len());
        kind.exit_code()
    }))
}

fn run_study(
    kind: ExperimentKind,
    args: StudyArgs,
    mixture: Option<NullMixture>,
    power: Option<PowerScenario>,
) -> Result<()> {
    let doc: SimulationDocument = match &args.config {
        Some(path) => csmt::cli_io::load_document(path)?,
        None => SimulationDocument::default(),
    };
    let c = args.common;
    let flags = SimulationOverrides {
        preset: c.preset,
        seed: c.seed,
        n: args.n,
        n_tests: args.n_tests,
        methods: c.methods.clone(),
        level: c.level,
        k: c.k,
        m: c.m,
        weights: c.weights(),
        mixture,
        power,
    };
    let cfg = SimulationConfig::resolve(kind, doc, flags)?;
    let reports = run_simulation(&cfg)?;
    match (&c.out, c.format.unwrap_or_default()) {
        (Some(dir), _) => {
            write_simulation_outputs(&reports, dir)?;
            let mut out = std::io::stdout().lock();
            write_rate_table(&reports, &mut out)?;
            Ok(())
        }
        (None, OutputFormat::Csv) => write_rate_table(&reports, std::io::stdout().lock()),
        (None, OutputFormat::Json) => {
            let mut out = std::io::stdout().lock();
            for r in &reports {
                serde_json::to_writer_pretty(&mut out, r)?;
                writeln!(out)?;
            }
            Ok(())
        }
    }
}

/// Writes a calibration summary as JSON, or as a one-row CSV of its scalar
/// fields.
fn emit_record<T: serde::Serialize>(c: &Common, record: &T) -> Result<()> {
    let mut buf = Vec::new();
    match c.format.unwrap_or_default() {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut buf, record)?;
            buf.push(b'\n');
        }
        OutputFormat::Csv => {
            let value = serde_json::to_value(record)?;
            let mut flat = Vec::new();
            flatten("", &value, &mut flat);
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(flat.iter().map(|(k, _)| k))?;
            w.write_record(flat.iter().map(|(_, v)| v))?;
            w.flush()?;
        }
    }
    match &c.out {
        Some(path) => std::fs::write(path, buf)?,
        None => std::io::stdout().lock().write_all(&buf)?,
    }
    Ok(())
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut Vec<(String, String)>) {
    match v {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        serde_json::Value::Number(n) => out.push((
            prefix.to_string(),
            if n.is_f64() {
                n.as_f64().map_or_else(|| n.to_string(), csmt::cli_io::format::machine)
            } else {
                n.to_string()
            },
        )),
        serde_json::Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}
