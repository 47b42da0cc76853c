//! Command-line front-end: configure a model/observable/size grid, run the
//! Lanczos engines and exact diagonalization, and write CSV/JSON artifacts.

mod config;
mod output;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::{ConfigError, RunConfig};
use pipeline::Pipeline;

#[derive(Parser, Debug)]
#[command(name = "finite-lanczos", version, about = "Operator Lanczos coefficients and autocorrelations of spin chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (overrides `workers`).
    #[arg(long)]
    workers: Option<usize>,
    /// `dotted.key=value`, value parsed as TOML. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Lanczos coefficients per size and method.
    Coefficients(Common),
    /// C(t), plateau and optional spectral density per size and method.
    Autocorrelation(Common),
    /// Maximum pairwise deviation of C(t) between methods.
    Compare(Common),
    /// Rates, cumulative products, fits and collapse curves from stored coefficients.
    Analyze(Common),
    /// Every stage in order.
    All(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Coefficients(c) => ("coefficients", c),
            Command::Autocorrelation(c) => ("autocorrelation", c),
            Command::Compare(c) => ("compare", c),
            Command::Analyze(c) => ("analyze", c),
            Command::All(c) => ("all", c),
        }
    }
}

fn load(common: &Common) -> anyhow::Result<RunConfig> {
    let mut overrides = common.overrides.clone();
    if let Some(out) = &common.out {
        overrides.push(format!("output_dir={}", toml::Value::String(out.display().to_string())));
    }
    if let Some(w) = common.workers {
        overrides.push(format!("workers={w}"));
    }
    Ok(RunConfig::load(&common.config)?.with_overrides(&overrides)?)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let (name, common) = cli.command.parts();
    let cfg = load(common)?;
    let mut p = Pipeline::new(cfg, name)?;
    match &cli.command {
        Command::Coefficients(_) => p.coefficients()?,
        Command::Autocorrelation(_) => p.autocorrelation()?,
        Command::Compare(_) => p.compare()?,
        Command::Analyze(_) => p.analyze()?,
        Command::All(_) => {
            p.coefficients()?;
            p.autocorrelation()?;
            p.compare()?;
            p.analyze()?;
        }
    }
    p.finish()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            eprintln!("{}", json!({ "error": "usage", "message": e.to_string().trim_end() }));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, field, code) = match e.downcast_ref::<ConfigError>() {
                Some(c) => ("config", c.field().map(str::to_string), 2),
                None if e.downcast_ref::<finite_lanczos::Error>().is_some() => ("computation", None, 1),
                None => ("runtime", None, 1),
            };
            let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            eprintln!("{}", json!({ "error": kind, "field": field, "message": chain.join(": ") }));
            ExitCode::from(code)
        }
    }
}
