//! Every scenario at its default settings, summarised per acceptance criterion.
//!
//! Runs for several minutes on one core.

use std::process::ExitCode;
use std::time::Instant;

use shrinklab::ensemble::init_pool_from_env;
use shrinklab_cli::config::Config;
use shrinklab_cli::report::Check;
use shrinklab_cli::scenarios;

fn main() -> ExitCode {
    init_pool_from_env();
    let mut checks: Vec<(String, Check)> = Vec::new();
    let mut broken = Vec::new();
    for name in scenarios::names() {
        let cfg = Config::defaults(name).expect("listed scenario");
        let start = Instant::now();
        match scenarios::run(&cfg) {
            Ok(report) => {
                eprintln!("{name}: {} checks in {:.0} s", report.checks.len(), start.elapsed().as_secs_f64());
                checks.extend(report.checks.into_iter().map(|c| (name.to_string(), c)));
            }
            Err(e) => {
                eprintln!("{name}: error: {e:#}");
                broken.push(name);
            }
        }
    }

    let mut all = broken.is_empty();
    for k in 1..=10u8 {
        let mine: Vec<&(String, Check)> = checks.iter().filter(|(_, c)| c.criterion == Some(k)).collect();
        let pass = !mine.is_empty() && mine.iter().all(|(_, c)| c.pass);
        all &= pass;
        let failed: Vec<String> = mine
            .iter()
            .filter(|(_, c)| !c.pass)
            .map(|(s, c)| format!("{s}/{} [{} vs {}]", c.name, c.statistic, c.target))
            .collect();
        let detail = if mine.is_empty() {
            "no checks ran".to_string()
        } else if failed.is_empty() {
            format!("{} checks", mine.len())
        } else {
            failed.join("; ")
        };
        println!("C{k:<2} {}  {detail}", if pass { "PASS" } else { "FAIL" });
    }
    for name in &broken {
        println!("scenario {name} did not complete");
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
