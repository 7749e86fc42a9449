use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shrinklab::ensemble::{init_pool_from_env, THREADS_ENV};
use shrinklab_cli::config::Config;
use shrinklab_cli::scenarios;

#[derive(Parser)]
#[command(name = "shrinklab", version, about = "Monte Carlo scenarios for filtration-shrinkage experiments")]
#[command(after_help = format!("Worker threads are taken from {THREADS_ENV} (default: all cores)."))]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario config and write its report and CSV artifacts.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the available scenarios.
    List,
    /// Parse a config and echo it with defaults resolved; runs nothing.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::List => {
            print!("{}", scenarios::listing());
            ExitCode::SUCCESS
        }
        Cmd::Validate { config } => match Config::load(&config) {
            Ok(cfg) => {
                println!("ok");
                print!("{}", cfg.echo());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Cmd::Run { config, out } => {
            let mut cfg = match Config::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if out.is_some() {
                cfg.output_dir = out;
            }
            init_pool_from_env();
            let report = match scenarios::run(&cfg) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return ExitCode::from(1);
                }
            };
            print!("{}", report.render());
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                let failed: Vec<String> = report
                    .failures()
                    .map(|c| match c.criterion {
                        Some(k) => format!("C{k} {}", c.name),
                        None => c.name.clone(),
                    })
                    .collect();
                eprintln!("failed: {}", failed.join(", "));
                ExitCode::from(1)
            }
        }
    }
}
