use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tcell_cli::{cmd_compare, cmd_run_abm, cmd_run_ode, cmd_sweep, CliError, ConfigBuilder, SweepSpec};

/// Naive T cell lifespan simulator.
#[derive(Debug, Parser)]
#[command(name = "tcellsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// `key = value` configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output file (run-ode, run-abm, compare) or directory (sweep).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    /// ABM base seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// ABM ensemble size.
    #[arg(long, global = true, value_name = "N")]
    replicates: Option<u64>,

    /// Override a config key; repeatable, applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the ODE model and write the trajectory.
    RunOde,
    /// Run the agent-based ensemble and write its statistics.
    RunAbm,
    /// Run both engines and report their agreement.
    Compare,
    /// Run the ODE once per parameter value.
    Sweep {
        /// Parameter name, e.g. `b` or `params.b`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        values: Vec<f64>,
    },
}

fn builder(cli: &Cli) -> Result<ConfigBuilder, CliError> {
    let mut b = ConfigBuilder::new();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        b.apply_document(&text).map_err(|e| {
            CliError::Usage(format!("{}: {e}", path.display()))
        })?;
    }
    if let Some(seed) = cli.seed {
        b.apply_override(&format!("abm.seed={seed}"))?;
    }
    if let Some(n) = cli.replicates {
        b.apply_override(&format!("abm.replicates={n}"))?;
    }
    if let Some(out) = &cli.out {
        b.apply_override(&format!("output.path={}", out.display()))?;
    }
    for s in &cli.set {
        b.apply_override(s)?;
    }
    Ok(b)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let b = builder(cli)?;
    match &cli.command {
        Command::Sweep { param, values } => {
            let dir = cli
                .out
                .as_deref()
                .ok_or_else(|| CliError::Usage("sweep requires --out DIR".into()))?;
            let spec = SweepSpec {
                param: param.clone(),
                values: values.clone(),
            };
            let rows = cmd_sweep(&b, &spec, dir)?;
            eprintln!("wrote {} trajectories and summary.csv to {}", rows.len(), dir.display());
            Ok(())
        }
        cmd => {
            let cfg = b.build()?;
            match cmd {
                Command::RunOde => cmd_run_ode(&cfg),
                Command::RunAbm => cmd_run_abm(&cfg),
                Command::Compare => cmd_compare(&cfg).map(|_| ()),
                Command::Sweep { .. } => unreachable!(),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tcellsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
