use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use zfflow::harness::{self, RunConfig};
use zfflow::{HarnessError, SchemeKind};

#[derive(Parser)]
#[command(name = "zfflow", version = harness::VERSION, about = "Zero-factor spectral solvers for gradient flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run(Common),
    /// Convergence study of the configured scheme.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Descending step sizes, e.g. "0.05,0.025,0.0125".
        #[arg(long)]
        dt_ladder: String,
        /// Step size of the same-scheme reference run (default: finest / 32).
        #[arg(long)]
        reference_dt: Option<f64>,
    },
    /// Run the configured experiment once per scheme.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated scheme names.
        #[arg(long)]
        schemes: String,
    },
    /// Fast oracle and invariant checks.
    Selfcheck,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_assert: bool,
}

fn load(common: &Common) -> Result<RunConfig, HarnessError> {
    let text = std::fs::read_to_string(&common.config).map_err(|source| HarnessError::Io {
        path: common.config.display().to_string(),
        source,
    })?;
    let mut cfg = harness::parse_config(&text)?;
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if common.no_assert {
        cfg.assertions_on = false;
    }
    Ok(cfg)
}

fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> Result<Vec<T>, HarnessError>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<T>()
                .map_err(|e| HarnessError::Config(format!("--{flag}: `{x}`: {e}")))
        })
        .collect()
}

fn execute(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Run(common) => {
            let cfg = load(&common)?;
            let summary = harness::run_experiment(&cfg)?;
            let last = summary.reports.last().expect("initial row present");
            println!(
                "{} steps, E = {}, E_mod = {}, trace {}",
                summary.reports.len() - 1,
                last.e_orig,
                last.e_mod,
                summary.csv_path.display()
            );
        }
        Command::Converge {
            common,
            dt_ladder,
            reference_dt,
        } => {
            let cfg = load(&common)?;
            let ladder: Vec<f64> = parse_list("dt-ladder", &dt_ladder)?;
            let finest = ladder.iter().copied().fold(f64::INFINITY, f64::min);
            let table = harness::converge(&cfg, &ladder, reference_dt.unwrap_or(finest / 32.0))?;
            println!("dt,error,rate");
            for i in 0..table.dts.len() {
                let rate = if i == 0 {
                    String::new()
                } else {
                    format!("{:.4}", table.rates[i - 1])
                };
                println!("{},{:.4e},{}", table.dts[i], table.errors[i], rate);
            }
        }
        Command::Compare { common, schemes } => {
            let cfg = load(&common)?;
            let kinds: Vec<SchemeKind> = parse_list("schemes", &schemes)?;
            for s in harness::compare(&cfg, &kinds)? {
                println!("{}", s.csv_path.display());
            }
        }
        Command::Selfcheck => {
            let results = harness::selfcheck();
            for r in &results {
                println!(
                    "{} {}: {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.detail
                );
            }
            if let Some(r) = results.iter().find(|r| !r.passed) {
                return Err(HarnessError::Assertion {
                    step: 0,
                    inequality: r.name.to_string(),
                    lhs: f64::NAN,
                    rhs: f64::NAN,
                });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
