mod commands;
mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use config::ConfigError;
use ioncool::Error;

#[derive(Parser)]
#[command(name = "ioncool", version, about = "Sympathetic cooling studies for trapped-ion chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. --set chain.n_ions=21 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory (overrides output.dir)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; 0 picks one per core
    #[arg(long, env = "IONCOOL_THREADS", default_value_t = 0, global = true)]
    threads: usize,

    /// What to print on stdout
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Equilibrium positions of the configured chain
    Equilibrium,
    /// Normal-mode frequencies and participation vectors
    Modes,
    /// COM cooling limit n0 = h/c
    CoolingLimit,
    /// Occupation trajectory and gate fidelities through the circuit
    Trajectory,
    /// Rank every placement of the coolants in the chain
    PlacementScan,
    /// Circuit fidelity against the number of coolants
    CoolantScan,
    /// Circuit fidelity over cooling time and gates per cycle
    DutyScan,
    /// Cooling limit over COM frequency and coolant fill
    FreqFillScan,
    /// Fit the heating prefactor D and motional sensitivity kappa
    Calibrate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Equilibrium => "equilibrium",
            Command::Modes => "modes",
            Command::CoolingLimit => "cooling-limit",
            Command::Trajectory => "trajectory",
            Command::PlacementScan => "placement-scan",
            Command::CoolantScan => "coolant-scan",
            Command::DutyScan => "duty-scan",
            Command::FreqFillScan => "freq-fill-scan",
            Command::Calibrate => "calibrate",
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("cannot start thread pool: {0}")]
    Threads(String),
}

impl Failure {
    fn kind(&self) -> (&'static str, u8) {
        match self {
            Failure::Config(ConfigError::Read { .. }) | Failure::Io(_) | Failure::Threads(_) => ("io", 1),
            Failure::Config(_) => ("schema", 2),
            Failure::Core(e) => match e {
                Error::Domain(_) | Error::NoCooling => ("schema", 2),
                Error::GuardExceeded { .. } => ("guard", 4),
                Error::Convergence { .. }
                | Error::Singular { .. }
                | Error::Unstable { .. }
                | Error::DegenerateMode { .. }
                | Error::Degeneracy { .. }
                | Error::Numeric(_) => ("convergence", 3),
            },
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Failure::Threads(e.to_string()))?;
    }
    let mut cfg = config::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.clone();
    }
    let outcome = match cli.command {
        Command::Equilibrium => commands::equilibrium(&cfg),
        Command::Modes => commands::modes(&cfg),
        Command::CoolingLimit => commands::cooling_limit_cmd(&cfg),
        Command::Trajectory => commands::trajectory(&cfg),
        Command::PlacementScan => commands::placement_scan(&cfg),
        Command::CoolantScan => commands::coolant_scan(&cfg),
        Command::DutyScan => commands::duty_scan(&cfg),
        Command::FreqFillScan => commands::freq_fill_scan(&cfg),
        Command::Calibrate => commands::calibrate(&cfg),
    }?;
    let study = cli.command.name();
    let (csv_path, json_path, summary) = output::write(study, &cfg, &outcome)?;
    let text = match cli.format {
        Format::Text => format!(
            "{study}: {}\nwrote {}\nwrote {}\n",
            outcome.headline,
            csv_path.display(),
            json_path.display()
        ),
        Format::Json => format!("{}\n", serde_json::to_string(&summary).expect("summary serializes")),
    };
    // a closed stdout (e.g. piped into `head`) is not a failure
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = e.kind();
            let doc = json!({ "error": { "kind": kind, "message": e.to_string(), "exit_code": code } });
            eprintln!("{doc}");
            ExitCode::from(code)
        }
    }
}
