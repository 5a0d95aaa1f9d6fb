//! Batch front end: parse a scenario file, run named experiments, write
//! machine-readable reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use fieldprobe::config::ScenarioConfig;
use fieldprobe::experiments;
use fieldprobe::report;

#[derive(Parser)]
#[command(name = "fieldprobe", version, about = "Lattice measurement-scheme experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments named in a scenario file.
    Run {
        /// Path to the TOML scenario.
        config: PathBuf,
        /// Output directory for reports (overrides the scenario).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed override for randomized suites.
        #[arg(long)]
        seed: Option<u64>,
        /// Print the combined report to stdout as JSON.
        #[arg(long)]
        json: bool,
    },
    /// List the experiment catalogue.
    List {
        /// Print as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Parse and validate a scenario file without running it.
    Validate {
        /// Path to the TOML scenario.
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List { json } => {
            if json {
                print!("{}", report::canonical_json(&experiments::catalogue_json()));
            } else {
                for (name, keys) in experiments::CATALOGUE {
                    println!("{name:22} {keys}");
                }
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load_and_prepare(&config) {
            Ok(_) => {
                println!("ok");
                ExitCode::SUCCESS
            }
            Err(e) => {
                emit_error("validation", &e);
                ExitCode::from(1)
            }
        },
        Command::Run { config, out, seed, json } => match run(&config, out, seed, json) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(2),
            Err(e) => {
                emit_error("run", &e);
                ExitCode::from(1)
            }
        },
    }
}

fn emit_error(stage: &str, e: &fieldprobe::Error) {
    let payload = json!({
        "error": { "stage": stage, "message": e.to_string() }
    });
    eprint!("{}", report::canonical_json(&payload));
}

fn load_and_prepare(path: &Path) -> fieldprobe::Result<(String, ScenarioConfig)> {
    let text = std::fs::read_to_string(path)?;
    let cfg = ScenarioConfig::from_toml(&text)?;
    cfg.prepare()?;
    Ok((text, cfg))
}

fn run(path: &Path, out: Option<PathBuf>, seed: Option<u64>, print_json: bool) -> fieldprobe::Result<bool> {
    let (text, mut cfg) = load_and_prepare(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let hash = report::config_hash(&text);
    let out_dir = out
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("fieldprobe-out"));
    std::fs::create_dir_all(&out_dir)?;
    let prepared = cfg.prepare()?;
    let mut all_pass = true;
    let mut reports = Vec::new();
    for (index, spec) in cfg.experiments.iter().enumerate() {
        let value = experiments::run_experiment(&prepared, spec, &hash, cfg.seed, &out_dir)?;
        let pass = value["pass"].as_bool().unwrap_or(false);
        all_pass &= pass;
        let file = out_dir.join(format!("{index:02}_{}.json", spec.name));
        std::fs::write(&file, report::canonical_json(&value))?;
        println!("{} {}", if pass { "PASS" } else { "FAIL" }, spec.name);
        reports.push(value);
    }
    if print_json {
        print!("{}", report::canonical_json(&serde_json::Value::Array(reports)));
    }
    Ok(all_pass)
}
