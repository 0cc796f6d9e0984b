use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ebsurf_cli::commands::{run, CliError, Command};
use ebsurf_cli::config::{RawConfig, RunConfig};

/// Empirical Bayes marginal-likelihood surfaces from a single MCMC run.
#[derive(Parser)]
#[command(name = "ebsurf", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Estimate B(h) and posterior expectations over the grid.
    Surface(Common),
    /// Maximise B over the rect and report a confidence region.
    Argmax(Common),
    /// Simultaneous confidence bands over the grid.
    Band {
        #[command(flatten)]
        common: Common,
        /// Repeat with fresh toy chains and report simultaneous coverage.
        #[arg(long, value_name = "N")]
        replicate: Option<usize>,
    },
    /// Tune serial tempering normalising constants.
    StTune(Common),
    /// Run a serial tempering chain and write its trace.
    StRun(Common),
    /// Write a synthetic dataset.
    Synth(Common),
    /// Compare toy estimates with their closed forms.
    OracleCheck(Common),
}

#[derive(Args)]
struct Common {
    /// Sectioned key=value configuration file.
    config: PathBuf,
    /// Override one entry, e.g. `--set chain.n=5000`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    /// Override `[model] id`.
    #[arg(long)]
    model: Option<String>,
    /// Override `[chain] h1`, e.g. `--h1 0,1`.
    #[arg(long, allow_hyphen_values = true)]
    h1: Option<String>,
    /// Override `[chain] n`.
    #[arg(long)]
    n: Option<usize>,
    /// Override `[chain] R`.
    #[arg(long = "R", id = "R")]
    r: Option<usize>,
    /// Override `[chain] trace`.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Override `[inference] M`.
    #[arg(long = "M", id = "M")]
    batches: Option<usize>,
    /// Override `[inference] alpha`.
    #[arg(long)]
    alpha: Option<f64>,
    /// Override `[inference] functionals`, e.g. `--functionals B,theta1`.
    #[arg(long)]
    functionals: Option<String>,
    /// Override `[chain] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; takes precedence over EBSURF_OUT and `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

const LENGTH_KEYS: [&str; 3] = ["n", "R", "trace"];

/// Command-line paths are relative to the working directory, not the config file.
fn absolute(p: &std::path::Path) -> String {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf()).display().to_string()
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut raw = RawConfig::from_file(&common.config)?;
    for s in &common.set {
        raw.set(s)?;
    }
    let flags = [
        ("model.id", common.model.clone()),
        ("chain.h1", common.h1.clone()),
        ("chain.n", common.n.map(|v| v.to_string())),
        ("chain.R", common.r.map(|v| v.to_string())),
        ("chain.trace", common.trace.as_ref().map(|p| absolute(p))),
        ("inference.M", common.batches.map(|v| v.to_string())),
        ("inference.alpha", common.alpha.map(|v| v.to_string())),
        ("inference.functionals", common.functionals.clone()),
        ("chain.seed", common.seed.map(|v| v.to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            // The run length is one choice among `n`, `R` and a stored trace.
            if let Some(k) = key.strip_prefix("chain.").filter(|k| LENGTH_KEYS.contains(k)) {
                for other in LENGTH_KEYS.iter().filter(|o| *o != &k) {
                    raw.remove("chain", other);
                }
            }
            raw.set(&format!("{key}={v}"))?;
        }
    }
    let out = common.out.clone().or_else(|| std::env::var_os("EBSURF_OUT").map(PathBuf::from));
    Ok(RunConfig::from_raw(raw, out)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match &cli.command {
        Sub::Surface(c) => (Command::Surface, c),
        Sub::Argmax(c) => (Command::Argmax, c),
        Sub::Band { common, replicate } => (Command::Band { replicate: *replicate }, common),
        Sub::StTune(c) => (Command::StTune, c),
        Sub::StRun(c) => (Command::StRun, c),
        Sub::Synth(c) => (Command::Synth, c),
        Sub::OracleCheck(c) => (Command::OracleCheck, c),
    };
    let result = load(common).and_then(|cfg| run(command, &cfg));
    match result {
        Err(e) => {
            eprintln!("ebsurf: {e}");
            ExitCode::from(2)
        }
        Ok(report) => {
            // A closed stdout (e.g. piped into `head`) is not an error.
            let mut stdout = std::io::stdout().lock();
            for n in &report.notes {
                let _ = writeln!(stdout, "{n}");
            }
            for f in &report.files {
                let _ = writeln!(stdout, "wrote {}", f.display());
            }
            for w in &report.warnings {
                eprintln!("ebsurf: warning: {w}");
            }
            if report.warnings.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
