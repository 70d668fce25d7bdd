//! Command-line front end. Exit status: 0 success, 1 configuration error,
//! 2 numerical failure or non-convergence. Errors go to stderr as JSON.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hylomorph::config::RunConfig;
use hylomorph::workflows::{run_evolve, run_solve, run_testfn, run_verify, Outcome, Overrides};
use hylomorph::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "hylomorph",
    version,
    about = "Variational solver and verification workbench for hylomorphic solitons"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Hypothesis check, hylomorphy report, free minimization and constrained cross-check.
    Solve(Common),
    /// Evolve a perturbed reference and monitor conservation and orbital distance.
    Evolve(Common),
    /// Run the property suites; exits 0 iff every property passes.
    Verify(Common),
    /// Sweep the test functions and report the hylomorphy verdict.
    Testfn(Common),
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; defaults to `[output] dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    deterministic: bool,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, value_name = "N")]
    max_iters: Option<usize>,
    #[arg(long, value_name = "X")]
    tol: Option<f64>,
}

type Workflow = fn(&RunConfig, &Path) -> Result<Outcome>;

fn run(cli: Cli) -> Result<Outcome> {
    let (common, workflow): (Common, Workflow) = match cli.command {
        Command::Solve(c) => (c, run_solve),
        Command::Evolve(c) => (c, run_evolve),
        Command::Verify(c) => (c, run_verify),
        Command::Testfn(c) => (c, run_testfn),
    };
    let mut cfg = RunConfig::load(&common.config)?;
    Overrides {
        deterministic: common.deterministic,
        seed: common.seed,
        max_iters: common.max_iters,
        tol: common.tol,
    }
    .apply(&mut cfg)?;
    let out = common.out.unwrap_or_else(|| cfg.output.dir.clone());
    workflow(&cfg, &out)
}

fn error_json(e: &Error) -> String {
    serde_json::json!({
        "error": e.kind(),
        "message": e.to_string(),
        "exit_code": e.exit_code(),
    })
    .to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = Error::Usage(e.to_string());
            eprintln!("{}", error_json(&err));
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(outcome) => {
            println!("{}", outcome.report.display());
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
