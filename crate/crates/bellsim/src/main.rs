//! Command-line entry point: runs one scenario against a configuration
//! file (or the built-in defaults) and writes the result table as CSV.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 on runtime
//! errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bellsim::config::{load_config, ExperimentConfig, ScenarioKind};
use bellsim::scenario::{run_scenario, write_table, write_table_to};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "bellsim",
    version,
    about = "Remote atomic-qubit entanglement simulator: coincidence fringes, correlation scans, and CHSH Bell analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep θ_A at each configured θ_B and emit raw coincidence counters.
    Fringe(RunArgs),
    /// Sweep θ_A at each configured θ_B and emit E ± σ per point.
    Correlation(RunArgs),
    /// Run the four CHSH settings with four-run symmetrization and emit S ± σ.
    Chsh(RunArgs),
    /// Emit closed-form correlation and Bell values at the CHSH settings.
    Oracle(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file (`key = value` lines); defaults apply if omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed, overriding the configuration.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,

    /// Trials per measurement point, overriding the duration-based budget.
    #[arg(long, value_name = "N")]
    trials: Option<u64>,

    /// Output CSV path; stdout if omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

impl Command {
    fn scenario(&self) -> ScenarioKind {
        match self {
            Command::Fringe(_) => ScenarioKind::Fringe,
            Command::Correlation(_) => ScenarioKind::Correlation,
            Command::Chsh(_) => ScenarioKind::Chsh,
            Command::Oracle(_) => ScenarioKind::Oracle,
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Fringe(a) | Command::Correlation(a) | Command::Chsh(a) | Command::Oracle(a) => {
                a
            }
        }
    }
}

fn angles_distinct_mod_180(a: f64, b: f64) -> bool {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d) > 1e-9
}

fn build_config(command: &Command) -> Result<ExperimentConfig, String> {
    let args = command.args();
    let mut config = match &args.config {
        Some(path) => load_config(path).map_err(|e| e.to_string())?,
        None => ExperimentConfig::default(),
    };
    config.scenario = command.scenario();
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(trials) = args.trials {
        if trials == 0 {
            return Err("--trials must be positive".to_string());
        }
        config.trials_override = Some(trials);
    }
    if let Some(out) = &args.out {
        config.output_path = Some(out.clone());
    }
    if matches!(config.scenario, ScenarioKind::Chsh | ScenarioKind::Oracle) {
        let (a, ap, b, bp) = config.chsh_angles_deg;
        if !angles_distinct_mod_180(a, ap) || !angles_distinct_mod_180(b, bp) {
            return Err(
                "CHSH settings must use distinct θ_A/θ_A' and θ_B/θ_B' (mod 180°)".to_string(),
            );
        }
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match build_config(&cli.command) {
        Ok(config) => config,
        Err(message) => {
            eprintln!("config error: {message}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    let table = match run_scenario(&config) {
        Ok(table) => table,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };

    let result = match &config.output_path {
        Some(path) => write_table(&table, path),
        None => write_table_to(&table, std::io::stdout().lock()),
    };
    if let Err(err) = result {
        eprintln!("error writing output: {err}");
        return ExitCode::from(EXIT_RUNTIME);
    }
    ExitCode::SUCCESS
}
