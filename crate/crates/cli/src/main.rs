use clap::{Parser, Subcommand};
use maxpost_cli::{config, report, scenario};
use std::path::PathBuf;
use std::process::ExitCode;

/// Posteriors conditioned on null-measure sets: scenario runner.
///
/// Exit codes: 0 all thresholds met, 1 a threshold failed, 2 usage or
/// configuration error, 3 numerical failure.
#[derive(Parser)]
#[command(name = "maxpost", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file and write report.json,
    /// posterior.csv and convergence.csv.
    Run {
        /// Key/value config document (see README for the keys).
        config_file: PathBuf,
        /// Output directory; overrides the config and MAXPOST_OUTPUT_DIR.
        #[arg(long)]
        output_dir: Option<String>,
        /// Config overrides, e.g. --override a_schedule.steps=8.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Print the scenario catalog.
    ListScenarios {
        /// Machine-readable JSON instead of text.
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::ListScenarios { json } => {
            if json {
                let catalog: Vec<serde_json::Value> = config::ALL_SCENARIOS
                    .iter()
                    .map(|s| serde_json::json!({ "name": s.name(), "summary": s.summary() }))
                    .collect();
                println!("{}", serde_json::to_string_pretty(&catalog).unwrap());
            } else {
                for s in config::ALL_SCENARIOS {
                    println!("{:<28} {}", s.name(), s.summary());
                }
            }
            ExitCode::SUCCESS
        }
        Command::Run { config_file, output_dir, overrides } => {
            let text = match std::fs::read_to_string(&config_file) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", config_file.display());
                    return ExitCode::from(2);
                }
            };
            let mut cfg = match config::parse_config(&text, &overrides) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(2);
                }
            };
            if let Some(dir) = output_dir.or_else(|| std::env::var("MAXPOST_OUTPUT_DIR").ok()) {
                cfg.output_dir = dir;
            }
            for w in &cfg.warnings {
                eprintln!("warning: {w}");
            }
            let out_dir = PathBuf::from(&cfg.output_dir);
            match scenario::run_scenario(&cfg) {
                Ok(rep) => {
                    if let Err(e) = report::write_reports(&out_dir, &rep) {
                        eprintln!("error: cannot write reports to {}: {e}", out_dir.display());
                        return ExitCode::from(2);
                    }
                    for check in &rep.checks {
                        println!(
                            "{} {:<40} value {:>12.6e}  threshold {:>9.3e}",
                            if check.passed { "PASS" } else { "FAIL" },
                            check.name,
                            check.value,
                            check.threshold
                        );
                    }
                    println!("verdict: {}  ({:.2}s)", rep.verdict, rep.wall_time_seconds);
                    if rep.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("numerical failure: {e}");
                    report::write_failure(&out_dir, &cfg, &e.to_string());
                    ExitCode::from(3)
                }
            }
        }
    }
}
