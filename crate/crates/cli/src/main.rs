use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use relaysec_cli::config::{self, NetworkSource, Outputs, StrategyKind, Sweep};
use relaysec_cli::experiment::plot_script;
use relaysec_cli::validate::{self, SuiteOptions};
use relaysec_cli::{
    load_config, run_experiment_with, write_csv, ConfigError, ExperimentError, ExperimentSpec, Mode,
};

const EXIT_VALIDATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "relaysec",
    version,
    about = "Secrecy rate and outage of relay selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form values only.
    Analytic(RunArgs),
    /// Monte Carlo estimates only.
    Simulate(RunArgs),
    /// Closed form and Monte Carlo side by side.
    Sweep(RunArgs),
    /// Run the validation suite and print one line per criterion.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of IID relays.
    #[arg(long)]
    relays: Option<usize>,
    #[arg(long)]
    gamma_e_db: Option<f64>,
    /// Main-channel SNR axis as start:stop:step, or a single value.
    #[arg(long, value_name = "START:STOP:STEP")]
    snr_db: Option<String>,
    /// sdf, saf or opa-df.
    #[arg(long)]
    strategy: Option<String>,
    /// approx or exact-aps.
    #[arg(long)]
    af_model: Option<String>,
    #[arg(long)]
    first_hop_boost_db: Option<f64>,
    /// shared or per-relay.
    #[arg(long)]
    first_hop: Option<String>,
    #[arg(long)]
    target_rate: Option<f64>,
    /// asr, outage or both.
    #[arg(long)]
    outputs: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Divide secrecy rates by ln(1 + main SNR).
    #[arg(long)]
    normalize_awgn: bool,
    /// Also write a matplotlib script that plots the CSV.
    #[arg(long, requires = "out")]
    plot_script: Option<PathBuf>,
    /// Worker threads for the simulation (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Trials per Monte Carlo check.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

fn bad(path: &str, message: String) -> ConfigError {
    ConfigError {
        issues: vec![config::Issue {
            path: path.to_string(),
            message,
        }],
    }
}

fn parse_sweep(s: &str) -> Option<Sweep> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse().ok())
        .collect::<Option<_>>()?;
    match parts[..] {
        [x] => Some(Sweep::single(x)),
        [start, stop, step] => Some(Sweep { start, stop, step }),
        _ => None,
    }
}

fn build_spec(args: &RunArgs) -> Result<ExperimentSpec, ConfigError> {
    let mut spec = match &args.config {
        Some(path) => load_config(path)?,
        None => ExperimentSpec::default(),
    };
    let mut issues = Vec::new();
    let mut fail = |e: ConfigError| issues.extend(e.issues);
    if let Some(n) = args.relays {
        spec.network = NetworkSource::Iid(n);
    }
    if let Some(x) = args.gamma_e_db {
        spec.gamma_e_db = x;
    }
    if let Some(s) = &args.snr_db {
        match parse_sweep(s) {
            Some(sw) => spec.sweep = sw,
            None => fail(bad(
                "--snr-db",
                format!("expected start:stop:step or a number, got {s:?}"),
            )),
        }
    }
    if let Some(s) = &args.strategy {
        match StrategyKind::parse(s) {
            Some(k) => spec.strategy = k,
            None => fail(bad(
                "--strategy",
                format!("expected sdf, saf or opa-df, got {s:?}"),
            )),
        }
    }
    if let Some(s) = &args.af_model {
        match config::parse_af_variant(s) {
            Some(v) => spec.af_model.variant = v,
            None => fail(bad(
                "--af-model",
                format!("expected approx or exact-aps, got {s:?}"),
            )),
        }
    }
    if let Some(x) = args.first_hop_boost_db {
        spec.af_model.first_hop_boost_db = x;
    }
    if let Some(s) = &args.first_hop {
        match config::parse_first_hop(s) {
            Some(h) => spec.af_model.first_hop = h,
            None => fail(bad(
                "--first-hop",
                format!("expected shared or per-relay, got {s:?}"),
            )),
        }
    }
    if let Some(s) = &args.outputs {
        match Outputs::parse(s) {
            Some(o) => spec.outputs = o,
            None => fail(bad(
                "--outputs",
                format!("expected asr, outage or both, got {s:?}"),
            )),
        }
    }
    if let Some(x) = args.target_rate {
        spec.target_rate = x;
    }
    if let Some(x) = args.trials {
        spec.trials = x;
    }
    if let Some(x) = args.seed {
        spec.seed = x;
    }
    if args.normalize_awgn {
        spec.normalize_awgn = true;
    }
    if let Err(e) = spec.validate() {
        fail(e);
    }
    if issues.is_empty() {
        Ok(spec)
    } else {
        Err(ConfigError { issues })
    }
}

fn run(args: &RunArgs, mode: Mode) -> Result<(), ExperimentError> {
    let spec = build_spec(args)?;
    let rows = run_experiment_with(&spec, mode, args.threads)?;
    match &args.out {
        Some(path) => {
            write_csv(&rows, BufWriter::new(File::create(path)?))?;
            if let Some(script) = &args.plot_script {
                std::fs::write(script, plot_script(&path.to_string_lossy()))?;
            }
        }
        None => write_csv(&rows, io::stdout().lock())?,
    }
    Ok(())
}

fn validate(args: &ValidateArgs) -> ExitCode {
    let mut opts = SuiteOptions::default();
    if let Some(t) = args.trials {
        opts = opts.with_trials(t);
    }
    if let Some(s) = args.seed {
        opts.seed = s;
    }
    opts.threads = args.threads;
    let mut all = true;
    let mut out = io::stdout().lock();
    for criterion in validate::CRITERIA {
        let result = criterion(&opts);
        all &= result.passed();
        let _ = writeln!(out, "{result}");
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_VALIDATION)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, mode) = match &cli.command {
        Command::Validate(v) => return validate(v),
        Command::Analytic(a) => (a, Mode::AnalyticOnly),
        Command::Simulate(a) => (a, Mode::SimulateOnly),
        Command::Sweep(a) => (a, Mode::Both),
    };
    match run(args, mode) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
