use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use glduality::acceptance;
use glduality::harness::{self, report, Format};

#[derive(Parser)]
#[command(name = "glduality", about = "Duality checks for a double-well Ginzburg-Landau energy", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file
    Run {
        config: PathBuf,
        /// Write the JSON report here
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the report tables as CSV here
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Override the config seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep one parameter over a list of values
    Sweep {
        config: PathBuf,
        /// Parameter to sweep: K or eps
        #[arg(long)]
        param: String,
        /// Comma-separated values, e.g. 1,2,5,10
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the built-in acceptance suite
    Check,
}

fn load_scenario(path: &PathBuf, seed: Option<u64>) -> glduality::Result<harness::Scenario> {
    let text = std::fs::read_to_string(path)?;
    let mut s = harness::parse_config(&text)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

fn finish(
    report: &report::Report,
    out: Option<PathBuf>,
    csv: Option<PathBuf>,
) -> glduality::Result<ExitCode> {
    for v in &report.verdicts {
        println!(
            "{} {:<24} margin {:+.3e}  {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.name,
            v.margin,
            v.detail
        );
    }
    if let Some(path) = out {
        harness::emit(report, Format::Json, &path)?;
        println!("report written to {}", path.display());
    }
    if let Some(path) = csv {
        harness::emit(report, Format::Csv, &path)?;
        println!("tables written to {}", path.display());
    }
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn run() -> glduality::Result<ExitCode> {
    match Cli::parse().command {
        Command::Run { config, out, csv, seed } => {
            let s = load_scenario(&config, seed)?;
            finish(&harness::run_scenario(&s), out, csv)
        }
        Command::Sweep { config, param, values, out, csv, seed } => {
            let mut s = load_scenario(&config, seed)?;
            s.task = harness::Task::Sweep;
            s.sweep_param = Some(param);
            s.sweep_values = values
                .split(',')
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|_| {
                        glduality::Error::InvalidParameter(format!("bad sweep value `{v}`"))
                    })
                })
                .collect::<glduality::Result<_>>()?;
            finish(&harness::run_scenario(&s), out, csv)
        }
        Command::Check => {
            let results = acceptance::run_all();
            let mut ok = true;
            for c in &results {
                println!("{}", acceptance::format_line(c));
                ok &= c.pass;
            }
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
