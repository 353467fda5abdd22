use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use conecap::config::validate_config;
use conecap::presets::Preset;
use conecap::report::run_preset;
use conecap::Error;

/// Exit status of a run whose acceptance checks failed.
const EXIT_CHECKS_FAILED: u8 = 1;
const EXIT_SOLVER_STALL: u8 = 2;
const EXIT_EXTRAPOLATION: u8 = 3;
const EXIT_INVALID_CONFIG: u8 = 4;
/// Any other runtime failure (I/O, diagnostics).
const EXIT_OTHER: u8 = 5;

#[derive(Parser)]
#[command(
    name = "conecap",
    version,
    about = "p-capacity and weak IMCF experiments on conical warped products"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset experiment and write its reports.
    Run {
        preset: String,
        #[arg(long)]
        config: PathBuf,
        /// Output root; falls back to the configuration, then ./conecap-out.
        #[arg(long, env = "CONECAP_OUT")]
        out: Option<PathBuf>,
        /// Worker threads for independent solves and table rows.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Validate a configuration file.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the preset experiments.
    ListPresets,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::SolverStall { .. } => EXIT_SOLVER_STALL,
        Error::ExtrapolationUnreliable(_) => EXIT_EXTRAPOLATION,
        Error::InvalidConfig(_) => EXIT_INVALID_CONFIG,
        _ => EXIT_OTHER,
    }
}

fn report_error(e: &Error) {
    eprintln!("error: {e}");
    if let Error::InvalidConfig(issues) = e {
        for i in issues {
            eprintln!("  {i}");
        }
    }
}

fn read_config(path: &PathBuf) -> Result<conecap::config::ExperimentConfig, Error> {
    let raw = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    validate_config(&raw)
}

fn run(preset: &str, config: &PathBuf, out: Option<PathBuf>, threads: Option<usize>) -> Result<u8, Error> {
    let Some(preset) = Preset::from_name(preset) else {
        let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
        return Err(Error::InvalidConfig(vec![conecap::error::ConfigIssue {
            line: None,
            path: "preset".into(),
            message: format!("unknown preset {preset:?} (expected one of: {})", names.join(", ")),
        }]));
    };
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    let cfg = read_config(config)?;
    let root = out
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("conecap-out"));
    let outcome = run_preset(preset, &cfg, &root)?;
    for c in &outcome.output.checks {
        let bound = c.tolerance.map(|t| format!(" (tolerance {t:e})")).unwrap_or_default();
        println!(
            "{} {}: {:e}{bound} {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.detail
        );
    }
    println!("wrote {}", outcome.directory.display());
    Ok(if outcome.manifest.passed { 0 } else { EXIT_CHECKS_FAILED })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            preset,
            config,
            out,
            threads,
        } => run(&preset, &config, out, threads),
        Command::Validate { config } => read_config(&config).map(|cfg| {
            println!("ok: config hash {}", cfg.hash());
            0
        }),
        Command::ListPresets => {
            for p in Preset::ALL {
                println!("{:<16} {}", p.name(), p.statement());
            }
            Ok(0)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            report_error(&e);
            ExitCode::from(exit_code(&e))
        }
    }
}
