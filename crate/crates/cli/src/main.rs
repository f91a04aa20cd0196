use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wavelab_core::harness::output::Artifacts;
use wavelab_core::harness::scenario::{
    approx_report, evolve_report, interact_report, soliton_report, spectrum_report, write_summary,
};
use wavelab_core::harness::{run_scenario, Check, ScenarioConfig};
use wavelab_core::Result;

/// Solitary waves of the abcd Boussinesq system over a slowly varying bottom.
#[derive(Parser)]
#[command(name = "wavelab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solitary-wave profile at omega0 with its residual checks.
    Soliton(Common),
    /// Low spectrum, VK slope and coercivity of the linearized operator.
    Spectrum(Common),
    /// Approximate solution residuals and effective-ODE ratios over the ε list.
    Approx(Common),
    /// Time evolution at the first ε with the diagnostics table.
    Evolve(Common),
    /// Interaction runs through the bottom, tracked at every snapshot.
    Interact(Common),
    /// Runs the scenario named by `scenario.kind` in the config.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `scenario.out_dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

type Report = fn(&ScenarioConfig, &Path) -> Result<(Vec<Check>, Artifacts)>;

fn load(c: &Common) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(&c.config)?;
    if let Some(d) = &c.out_dir {
        cfg.scenario.out_dir = d.clone();
    }
    Ok(cfg)
}

fn single(c: &Common, name: &str, report: Report) -> Result<Vec<Check>> {
    let cfg = load(c)?;
    let dir = cfg.scenario.out_dir.join(name);
    let (checks, mut artifacts) = report(&cfg, &dir)?;
    write_summary(&mut artifacts, &dir, &checks)?;
    Ok(checks)
}

fn execute(cli: &Cli) -> Result<Vec<Check>> {
    match &cli.command {
        Command::Soliton(c) => single(c, "soliton", soliton_report),
        Command::Spectrum(c) => single(c, "spectrum", spectrum_report),
        Command::Approx(c) => single(c, "approx", approx_report),
        Command::Evolve(c) => single(c, "evolve", evolve_report),
        Command::Interact(c) => single(c, "interact", interact_report),
        Command::Sweep(c) => Ok(run_scenario(&load(c)?)?.checks),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(checks) => {
            println!("{}", Check::HEADER);
            for c in &checks {
                println!("{}", c.line());
            }
            if checks.iter().all(|c| c.pass) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("wavelab: {e}");
            ExitCode::from(2)
        }
    }
}
