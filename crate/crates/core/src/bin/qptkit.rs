use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use qptkit::experiment::{self, ExperimentConfig, QptMode};

/// Trotter and compressed Heisenberg-chain circuits, simulated process
/// tomography and spectral analysis.
#[derive(Parser, Debug)]
#[command(name = "qptkit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML experiment config; defaults are used when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set noise.p2=0.02`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    shots: Option<usize>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Mode {
    Full,
    Sqpt,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train brickwall circuits; writes params.json and trace.csv.
    Compress(Common),
    /// Approximation error vs CNOT count; writes scan.csv.
    InfidelityScan(Common),
    /// Process tomography; writes chi.csv, chi.json and fidelity.csv.
    Qpt {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "full")]
        mode: Mode,
    },
    /// χ diagonal by Pauli twirling; writes twirl.csv.
    Twirl(Common),
    /// Superoperator spectra; writes spectrum.csv and stats.json.
    Spectrum(Common),
    /// Gate-level OpenQASM 3 of every configured circuit.
    ExportQasm(Common),
    /// Validate a config and print it fully resolved, with its hash.
    Check(Common),
}

fn load(c: &Common) -> qptkit::Result<ExperimentConfig> {
    let mut overrides = c.overrides.clone();
    if let Some(d) = &c.output_dir {
        overrides.push(format!("output_dir={}", toml::Value::String(d.display().to_string())));
    }
    if let Some(s) = c.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(s) = c.shots {
        overrides.push(format!("shots={s}"));
    }
    ExperimentConfig::load(c.config.as_deref(), &overrides)
}

fn execute(cmd: Command) -> qptkit::Result<String> {
    let record = match cmd {
        Command::Compress(c) => experiment::cmd_compress(&load(&c)?)?,
        Command::InfidelityScan(c) => experiment::cmd_infidelity_scan(&load(&c)?)?,
        Command::Qpt { common, mode } => {
            let mode = match mode {
                Mode::Full => QptMode::Full,
                Mode::Sqpt => QptMode::Sqpt,
            };
            experiment::cmd_qpt(&load(&common)?, mode)?
        }
        Command::Twirl(c) => experiment::cmd_twirl(&load(&c)?)?,
        Command::Spectrum(c) => experiment::cmd_spectrum(&load(&c)?)?,
        Command::ExportQasm(c) => experiment::cmd_export_qasm(&load(&c)?)?,
        Command::Check(c) => {
            let cfg = load(&c)?.resolved();
            cfg.validate()?;
            let out = serde_json::json!({ "config_hash": cfg.hash(), "version": qptkit::VERSION, "config": cfg });
            return Ok(serde_json::to_string_pretty(&out)?);
        }
    };
    Ok(serde_json::to_string_pretty(&record)?)
}

fn report(kind: &str, message: &str) {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            report("usage", e.to_string().trim());
            return ExitCode::from(2);
        }
    };
    match execute(cli.command) {
        Ok(out) => {
            println!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            report(e.kind(), &e.to_string());
            ExitCode::FAILURE
        }
    }
}
