use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mcvd_cli::validate::{run_validate, AnalyticModel};
use mcvd_cli::{exit, optimize, sweep, CliError, ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(
    name = "mcvd",
    version,
    about = "Relay-assisted MCvD link: sweeps, symbol-duration optimization, oracle checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the link along the configured sweep axis.
    Sweep(Common),
    /// Find the symbol duration maximizing successfully received bits per second.
    Optimize(Common),
    /// Run the oracle suite and write a pass/fail report.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Seed for every Monte Carlo oracle.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; falls back to the file's output.dir, then $MCVD_OUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Bits per Monte Carlo BER estimate; turns the estimate on.
    #[arg(long)]
    mc_bits: Option<u64>,
    /// Skip all Monte Carlo work.
    #[arg(long, conflicts_with = "mc_bits")]
    no_mc: bool,
}

impl Common {
    fn load(&self) -> Result<(ExperimentConfig, PathBuf), CliError> {
        let overrides = Overrides {
            seed: self.seed,
            out: self.out.clone(),
            mc_bits: self.mc_bits,
            no_mc: self.no_mc,
        };
        let mut config = ExperimentConfig::load(&self.config)?;
        overrides.apply(&mut config);
        let out = overrides.out_dir(&config);
        Ok((config, out))
    }
}

fn warn(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Sweep(common) => {
            let (config, out) = common.load()?;
            let outcome = sweep::run_sweep(&config, &out)?;
            warn(&outcome.warnings);
            println!(
                "wrote {} ({} rows)",
                outcome.csv.display(),
                outcome.rows.len()
            );
            let infeasible = outcome.infeasible_rows();
            if infeasible > 0 {
                eprintln!("error: {infeasible} row(s) have an infeasible energy budget");
                return Ok(exit::INFEASIBLE);
            }
            Ok(exit::SUCCESS)
        }
        Command::Optimize(common) => {
            let (config, out) = common.load()?;
            let outcome = optimize::run_optimize(&config, &out)?;
            warn(&outcome.warnings);
            for r in &outcome.results {
                println!(
                    "{} {}: t* = {:.4} ms, F* = {:.6} bits/s, {} iterations",
                    r.case,
                    r.family,
                    r.optimum.t_star * 1e3,
                    r.optimum.f_star,
                    r.optimum.iterations
                );
            }
            println!("wrote {}", outcome.optimum_csv.display());
            Ok(exit::SUCCESS)
        }
        Command::Validate(common) => {
            let (config, out) = common.load()?;
            let (report, path) = run_validate(&config, &AnalyticModel::default(), &out)?;
            for (name, [pass, fail, skip]) in report.summary() {
                println!("{name}: {pass} pass, {fail} fail, {skip} skip");
            }
            println!("wrote {}", path.display());
            if report.passed() {
                Ok(exit::SUCCESS)
            } else {
                Ok(exit::ORACLE)
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
