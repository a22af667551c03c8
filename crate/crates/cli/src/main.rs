use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use etapair_cli::verify::{run_suite, Suite, VerifyOptions};
use etapair_cli::{run, CliError, Experiment, ExperimentConfig, Overrides, OUTPUT_ROOT_ENV};
use etapair_core::Boundary;

#[derive(Parser)]
#[command(name = "etapair", version, about = "Dissipative eta-pairing in the Hubbard chain: batch runs and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML config, or from an experiment's built-in defaults.
    Run {
        /// Config file path or experiment name.
        config: String,
        #[arg(long, env = OUTPUT_ROOT_ENV, default_value = etapair_cli::DEFAULT_OUTPUT_ROOT)]
        output_root: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Run an invariant suite and print per-check violations.
    Verify {
        #[arg(value_enum)]
        suite: SuiteArg,
        #[arg(long)]
        n_sites: Option<usize>,
        #[arg(long, value_enum)]
        boundary: Option<BoundaryArg>,
        #[arg(long, value_delimiter = ',')]
        driven: Option<Vec<usize>>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// List the available experiments.
    ListExperiments,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Algebra,
    #[value(name = "appendixA", alias = "appendix-a")]
    AppendixA,
    #[value(name = "appendixC", alias = "appendix-c")]
    AppendixC,
    Consistency,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Obc,
    Pbc,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Obc => Boundary::Obc,
            BoundaryArg::Pbc => Boundary::Pbc,
        }
    }
}

#[derive(clap::Args)]
struct OverrideArgs {
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    n_sites: Option<usize>,
    #[arg(long, value_enum)]
    boundary: Option<BoundaryArg>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    u: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    driven: Option<Vec<usize>>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    widths: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides {
            theta: a.theta,
            n_sites: a.n_sites,
            boundary: a.boundary.map(Into::into),
            t: a.t,
            u: a.u,
            gamma: a.gamma,
            driven: a.driven,
            t_final: a.t_final,
            realizations: a.realizations,
            widths: a.widths,
            seed: a.seed,
            workers: a.workers,
            name: a.name,
            output_dir: a.output_dir,
        }
    }
}

fn load(config: &str) -> Result<ExperimentConfig, CliError> {
    let path = PathBuf::from(config);
    if path.exists() {
        return ExperimentConfig::from_path(&path);
    }
    match config.parse::<Experiment>() {
        Ok(e) => Ok(ExperimentConfig::default_for(e)),
        Err(_) => Err(CliError::Config(format!("`{config}` is neither a config file nor an experiment name"))),
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("{}", e.record());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, output_root, overrides } => {
            let mut cfg = match load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            cfg.apply(&overrides.into());
            match run(&cfg, &output_root) {
                Ok(summary) => {
                    println!("{}", serde_json::json!({
                        "status": if summary.outcome.converged { "ok" } else { "not_converged" },
                        "output_dir": summary.dir,
                    }));
                    if summary.outcome.converged {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(3)
                    }
                }
                Err(e) => fail(e),
            }
        }
        Command::Verify { suite, n_sites, boundary, driven, json } => {
            let suite = match suite {
                SuiteArg::Algebra => Suite::Algebra,
                SuiteArg::AppendixA => Suite::AppendixA,
                SuiteArg::AppendixC => Suite::AppendixC,
                SuiteArg::Consistency => Suite::Consistency,
            };
            let opts = VerifyOptions { n_sites, boundary: boundary.map(Into::into), driven };
            match run_suite(suite, &opts) {
                Ok(report) => {
                    if json {
                        println!("{}", serde_json::to_string_pretty(&report).unwrap_or_default());
                    } else {
                        println!("{report}");
                    }
                    if report.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(e) => fail(e),
            }
        }
        Command::ListExperiments => {
            for e in Experiment::ALL {
                println!("{:<20} {}", e.name(), e.description());
            }
            ExitCode::SUCCESS
        }
    }
}
