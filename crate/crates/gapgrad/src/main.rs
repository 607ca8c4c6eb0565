use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, ValueEnum};
use gapgrad::{run_experiment, ExperimentConfig, ExperimentKind};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Exponents,
    Eigensolve,
    Decay,
    RateSweep,
    LowerBound,
    Moser,
    Constants,
    Cube,
}

impl From<Kind> for ExperimentKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Exponents => ExperimentKind::Exponents,
            Kind::Eigensolve => ExperimentKind::Eigensolve,
            Kind::Decay => ExperimentKind::Decay,
            Kind::RateSweep => ExperimentKind::RateSweep,
            Kind::LowerBound => ExperimentKind::LowerBound,
            Kind::Moser => ExperimentKind::Moser,
            Kind::Constants => ExperimentKind::Constants,
            Kind::Cube => ExperimentKind::Cube,
        }
    }
}

/// Runs one experiment. Exit status: 0 all verdicts pass, 1 a verdict
/// fails, 2 the run could not complete.
#[derive(Debug, Parser)]
#[command(name = "gapgrad", version)]
struct Cli {
    kind: Kind,
    /// TOML config, or JSON with a `.json` extension or `--json`.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    json: bool,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    if let Ok(t) = std::env::var("GAPGRAD_THREADS") {
        let n: usize = t
            .parse()
            .context("GAPGRAD_THREADS must be a positive integer")?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    let text = std::fs::read_to_string(&cli.config)
        .with_context(|| format!("reading {}", cli.config.display()))?;
    let json = cli.json
        || cli
            .config
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let mut config = ExperimentConfig::parse(&text, json, Some(cli.kind.into()))
        .with_context(|| format!("parsing {}", cli.config.display()))?;
    if cli.out.is_some() {
        config.output_dir = cli.out;
    }
    let bundle = run_experiment(&config)?;
    print!("{}", bundle.summary());
    Ok(bundle.passed())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
