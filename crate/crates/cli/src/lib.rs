//! Command-line front end of exitlab: reads an experiment configuration,
//! runs one command and writes `report.json` plus plot-ready CSV files.

pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use commands::{Failure, Outcome};
use config::ExperimentConfig;

pub const SCHEMA_ID: &str = "exitlab-report/v1";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "exitlab", version, about = "Exit-event experiments for overdamped Langevin dynamics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Check the hypotheses on (f, Ω₋, Ω₊); exit 1 if they fail.
    Check(Common),
    /// Small eigenvalues, eigenvectors and counts per h.
    Spectrum(Common),
    /// Asymptotic exit rate and density against the numeric ones.
    Asymptotics(Common),
    /// Monte Carlo exit statistics started from the QSD.
    Mc(Common),
    /// Compare biased and unbiased exit laws through the boost factor.
    Hyperdyn(Common),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub threads: Option<u64>,
    #[arg(long, conflicts_with = "beta", value_parser = positive)]
    pub h: Option<f64>,
    #[arg(long, value_parser = positive)]
    pub beta: Option<f64>,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got {s}")),
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check(_) => "check",
            Command::Spectrum(_) => "spectrum",
            Command::Asymptotics(_) => "asymptotics",
            Command::Mc(_) => "mc",
            Command::Hyperdyn(_) => "hyperdyn",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Check(c) | Command::Spectrum(c) | Command::Asymptotics(c) | Command::Mc(c) | Command::Hyperdyn(c) => c,
        }
    }

    fn randomized(&self) -> bool {
        matches!(self, Command::Mc(_) | Command::Hyperdyn(_))
    }
}

/// Full report: the envelope shared by every command around its result.
pub fn envelope(cmd: &str, cfg: &ExperimentConfig, seed: Option<u64>, outcome: &Outcome) -> Value {
    let mut echo = cfg.clone();
    echo.out = None;
    json!({
        "schema": SCHEMA_ID,
        "version": exitlab::VERSION,
        "command": cmd,
        "pass": outcome.pass,
        "seed": seed,
        "config": echo,
        "result": outcome.result,
    })
}

fn write_outputs(dir: &Path, report: &Value, files: &[(PathBuf, String)]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (rel, text) in files {
        let p = dir.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(p, text)?;
    }
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    std::fs::write(dir.join("report.json"), text)
}

fn execute(cmd: &Command, cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    match cmd {
        Command::Check(_) => commands::check(cfg),
        Command::Spectrum(_) => commands::spectrum(cfg),
        Command::Asymptotics(_) => commands::asymptotics(cfg),
        Command::Mc(_) => commands::mc(cfg),
        Command::Hyperdyn(_) => commands::hyperdyn(cfg),
    }
}

/// Run a parsed command and return the process exit code.
pub fn run(cli: Cli) -> i32 {
    let cmd = cli.command;
    let c = cmd.common().clone();
    let mut cfg = match ExperimentConfig::load(&c.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    cfg.apply_overrides(c.h, c.beta, c.seed);
    if let Err(e) = cfg.validate(!matches!(cmd, Command::Check(_))) {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    let out = c.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = c.threads {
        pool = pool.num_threads(n as usize);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_NUMERIC;
        }
    };
    let outcome = match pool.install(|| execute(&cmd, &cfg)) {
        Ok(o) => o,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            return EXIT_USAGE;
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("numeric failure: {e}");
            return EXIT_NUMERIC;
        }
    };
    let seed = cmd.randomized().then_some(cfg.mc.seed);
    let report = envelope(cmd.name(), &cfg, seed, &outcome);
    if let Err(e) = write_outputs(&out, &report, &outcome.files) {
        eprintln!("error: writing {}: {e}", out.display());
        return EXIT_USAGE;
    }
    println!("{} {}: {}", cmd.name(), if outcome.pass { "pass" } else { "fail" }, out.join("report.json").display());
    if outcome.pass {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}
