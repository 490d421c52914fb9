use std::path::PathBuf;
use std::process::ExitCode;

use barrier_lab::{builtin, compare, run, CliError};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "barrier-lab", version, about = "Analyze safety filters and CLF-CBF QP controllers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task of a scenario config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Describe a built-in scenario or print its config.
    Scenario {
        name: String,
        /// Print the config as JSON instead of a description.
        #[arg(long)]
        emit_config: bool,
    },
    /// Compare equilibria, reduced spectra and boundary fields across the
    /// CBF pairs of a config.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn describe(cfg: &barrier_lab::ScenarioConfig) -> Result<String, CliError> {
    use std::fmt::Write as _;
    let scenario = barrier_lab::build(cfg)?;
    let mut s = String::new();
    let _ = writeln!(s, "scenario: {}", cfg.name);
    let _ = writeln!(
        s,
        "system: {} (n = {}, m = {})",
        scenario.model.label(),
        scenario.model.state_dim(),
        scenario.model.input_dim()
    );
    for (i, cbf) in scenario.cbfs.iter().enumerate() {
        let mark = if cfg.controller.cbfs().contains(&i) { "*" } else { " " };
        let _ = writeln!(s, "{mark} cbf {i}: {}", cbf.label());
    }
    let _ = writeln!(s, "controller: {}", scenario.controller.family().name());
    let tasks: Vec<&str> = cfg.tasks.iter().map(|t| t.name()).collect();
    let _ = writeln!(s, "tasks: {}", tasks.join(", "));
    for note in &cfg.notes {
        let _ = writeln!(s, "note: {note}");
    }
    Ok(s)
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    barrier_lab::configure_threads(std::env::var("BARRIER_LAB_THREADS").ok().as_deref())?;
    match cli.command {
        Command::Run { config, out } => {
            let scenario = barrier_lab::load(&config)?;
            let dir = run::resolve_out_dir(&scenario, out.as_deref());
            let report = run::run(&scenario, &dir)?;
            print!("{}", report.summary);
            println!("artifacts: {}", report.out_dir.display());
            for e in &report.errors {
                eprintln!("error: {e}");
            }
            Ok(report.exit_code())
        }
        Command::Scenario { name, emit_config } => {
            let cfg = builtin::scenario(&name)?;
            if emit_config {
                print!("{}", builtin::to_json(&cfg));
            } else {
                print!("{}", describe(&cfg)?);
            }
            Ok(0)
        }
        Command::Compare { config, out } => {
            let scenario = barrier_lab::load(&config)?;
            let dir = run::resolve_out_dir(&scenario, out.as_deref());
            let outcome = compare::compare(&scenario, &dir)?;
            print!("{}", outcome.summary);
            Ok(if outcome.report.passed { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
