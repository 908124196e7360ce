//! `rotogp` command-line driver.

mod config;
mod fock_cmd;
mod gp_cmd;
mod heat_cmd;
mod report;
mod scattering_cmd;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::{Failure, RunFile};
use report::Report;

#[derive(Parser, Debug)]
#[command(name = "rotogp", version, about = "Ground states of rotating Bose gases and the estimates around them")]
struct Cli {
    /// JSON run file `{"subcommand": ..., "params": {...}}`; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for results.json, CSV scans and field dumps.
    #[arg(long, global = true, default_value = "rotogp-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Minimize the rotating GP functional.
    SolveGp(gp_cmd::SolveGpFlags),
    /// Minimize over a range of rotation vectors Ω = (0, 0, Ω_z).
    ScanOmega(gp_cmd::ScanOmegaFlags),
    /// Minimize over couplings and check monotonicity and concavity in a.
    ScanA(gp_cmd::ScanAFlags),
    /// Vortex and angular momentum analysis of a field dump.
    Analyze(gp_cmd::AnalyzeFlags),
    /// Scattering length of a radial pair potential.
    Scattering(scattering_cmd::ScatteringFlags),
    /// Soft potentials, the single-center Dyson inequality and K₀.
    DysonCheck(scattering_cmd::DysonFlags),
    /// Exact diagonalization of a truncated many-mode Hamiltonian.
    FockEd(fock_cmd::FockEdFlags),
    /// Lower and upper symbols and the coherent-state resolution.
    SymbolsCheck(fock_cmd::SymbolsFlags),
    /// Heat-kernel diagonal bound and weighted trace.
    HeatBound(heat_cmd::HeatFlags),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::SolveGp(_) => "solve-gp",
            Self::ScanOmega(_) => "scan-omega",
            Self::ScanA(_) => "scan-a",
            Self::Analyze(_) => "analyze",
            Self::Scattering(_) => "scattering",
            Self::DysonCheck(_) => "dyson-check",
            Self::FockEd(_) => "fock-ed",
            Self::SymbolsCheck(_) => "symbols-check",
            Self::HeatBound(_) => "heat-bound",
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("ROTOGP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Config(format!("ROTOGP_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Config(format!("cannot size the thread pool: {e}")))
}

fn run(cli: Cli) -> Result<Report, Failure> {
    configure_threads()?;
    let name = cli.command.name();
    let file = cli.config.as_deref().map(|p| RunFile::load(p, name)).transpose()?;
    let params = file.as_ref().map(|f| &f.params);
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| Failure::Config(format!("cannot create output directory {}: {e}", cli.out.display())))?;
    let mut report = Report::new(name);
    let start = Instant::now();
    match &cli.command {
        Command::SolveGp(f) => gp_cmd::solve_gp(config::resolve(params, f)?, &cli.out, &mut report)?,
        Command::ScanOmega(f) => gp_cmd::scan_omega(config::resolve(params, f)?, &cli.out, &mut report)?,
        Command::ScanA(f) => gp_cmd::scan_a(config::resolve(params, f)?, &cli.out, &mut report)?,
        Command::Analyze(f) => gp_cmd::analyze(config::resolve(params, f)?, &cli.out, &mut report)?,
        Command::Scattering(f) => scattering_cmd::scattering(config::resolve(params, f)?, &mut report)?,
        Command::DysonCheck(f) => scattering_cmd::dyson_check(config::resolve(params, f)?, &mut report)?,
        Command::FockEd(f) => fock_cmd::fock_ed(config::resolve(params, f)?, &mut report)?,
        Command::SymbolsCheck(f) => fock_cmd::symbols_check(config::resolve(params, f)?, &mut report)?,
        Command::HeatBound(f) => heat_cmd::heat_bound(config::resolve(params, f)?, &mut report)?,
    }
    report.timing("total_s", start.elapsed().as_secs_f64());
    report.write(&cli.out)?;
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) => {
            for c in report.checks() {
                eprintln!("{} {}: {:e} (reference {:e}, tolerance {:e})", if c.passed { "ok  " } else { "FAIL" }, c.name, c.value, c.reference, c.tolerance);
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
