//! `hilbert-lyap`: batch experiments on Hilbert geometries.

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use config::Config;
use output::{write_outputs, Report, RunInfo};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] hilbert_core::Error),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "hilbert-lyap", version, about = "Lyapunov exponents of Hilbert geometries")]
struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `double` or `extended`.
    #[arg(long, global = true)]
    precision: Option<String>,
    /// Output directory for CSV files and manifest.json; tables go to stdout
    /// when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Extra `key=value` settings, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Hilbert distances between given or random point pairs.
    Dist,
    /// Geodesic flow positions and stable/unstable norms over a time grid.
    Flow,
    /// Transport exponents against boundary regularity exponents.
    Exponents,
    /// Regularity exponent estimators on a germ.
    Regularity,
    /// Legendre dual exponents of a germ.
    Duality,
    /// Classification and periodic exponents of a projective map.
    Isometry,
    /// Ball growth and volume entropy.
    Entropy,
    /// Ray decay rates in the half-disc.
    Halfdisc,
    /// Named assertion suites.
    Suite,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Dist => "dist",
            Command::Flow => "flow",
            Command::Exponents => "exponents",
            Command::Regularity => "regularity",
            Command::Duality => "duality",
            Command::Isometry => "isometry",
            Command::Entropy => "entropy",
            Command::Halfdisc => "halfdisc",
            Command::Suite => "suite",
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => Config::parse(&std::fs::read_to_string(p)?)?,
        None => Config::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects key=value, got '{kv}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = cli.seed {
        cfg.set("seed", &s.to_string())?;
    }
    if let Some(p) = &cli.precision {
        cfg.set("precision", p)?;
    }
    if let Some(o) = &cli.out {
        cfg.set("out", &o.to_string_lossy())?;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Report, CliError> {
    let cfg = load_config(cli)?;
    let seed: u64 = cfg.parsed("seed", 0)?;
    let precision = cfg.precision()?;
    let report = match cli.command {
        Command::Dist => commands::dist(&cfg, seed)?,
        Command::Flow => commands::flow_cmd(&cfg, precision)?,
        Command::Exponents => commands::exponents(&cfg, precision)?,
        Command::Regularity => commands::regularity(&cfg, precision)?,
        Command::Duality => commands::duality(&cfg, precision)?,
        Command::Isometry => commands::isometry(&cfg)?,
        Command::Entropy => commands::entropy(&cfg, seed)?,
        Command::Halfdisc => commands::halfdisc(&cfg)?,
        Command::Suite => commands::suite(&cfg, seed, precision)?,
    };
    match cfg.get("out") {
        Some(dir) if !report.tables.is_empty() => {
            let info = RunInfo {
                command: cli.command.name(),
                config_text: &cfg.canonical(),
                seed,
                precision: precision.to_string(),
            };
            write_outputs(&PathBuf::from(dir), &report, &info)?;
        }
        Some(_) => {}
        None => {
            for t in &report.tables {
                println!("# {}", t.name);
                print!("{}", t.to_csv());
            }
        }
    }
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("HILBERT_LYAP_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(&cli) {
        Ok(report) => {
            for c in &report.checks {
                eprintln!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failed = report.failed();
            if failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                eprintln!("assertion failed: {} of {} checks", failed.len(), report.checks.len());
                ExitCode::from(1)
            }
        }
        Err(e @ CliError::Config(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(3)
        }
    }
}
