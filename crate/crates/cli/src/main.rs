mod commands;
mod config;

use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::{CliError, CliResult, Opts, RunConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Holonomy, spectral curves and Darboux transforms of conformal tori in the 4-sphere.
#[derive(Parser, Debug)]
#[command(name = "cwtori", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Frame data, Willmore energy, normal degree and multiplier residuals.
    Analyze,
    /// Case label of the holonomy with per-sample evidence.
    Classify,
    /// Generator holonomies on the sweep circles.
    Holonomy,
    /// Eigenvalue branches, branch points and genus.
    Spectral,
    /// Darboux transform for `--mu` and `--eigen`.
    Darboux,
    /// Rank-1 family of the normal compared with the stripped 4x4 family.
    Harmonic,
    /// Sample a surface into the ingestion JSON format.
    Convert,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Classify => "classify",
            Command::Holonomy => "holonomy",
            Command::Spectral => "spectral",
            Command::Darboux => "darboux",
            Command::Harmonic => "harmonic",
            Command::Convert => "convert",
        }
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> CliResult<()> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn print_stdout(bytes: &[u8]) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes).and_then(|_| out.write_all(b"\n")).map_err(|e| CliError::io(format!("cannot write to stdout: {e}")))
}

fn run(command: Command, cfg: &RunConfig) -> CliResult<i32> {
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
    }
    if command == Command::Convert {
        let mesh = commands::convert_cmd(cfg)?;
        let bytes = serde_json::to_vec_pretty(&mesh).map_err(|e| CliError::io(e.to_string()))?;
        match &cfg.out {
            Some(dir) => write_file(dir, "surface.json", &bytes)?,
            None => print_stdout(&bytes)?,
        }
        return Ok(0);
    }
    let outcome = match command {
        Command::Analyze => commands::analyze_cmd(cfg),
        Command::Classify => commands::classify_cmd(cfg),
        Command::Holonomy => commands::holonomy_cmd(cfg),
        Command::Spectral => commands::spectral_cmd(cfg),
        Command::Darboux => commands::darboux_cmd(cfg),
        Command::Harmonic => commands::harmonic_cmd(cfg),
        Command::Convert => unreachable!(),
    }?;
    let envelope = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command.name(),
        "config": cfg.echo(),
        "result": outcome.result,
    });
    let text = serde_json::to_string_pretty(&envelope).map_err(|e| CliError::io(e.to_string()))?;
    match &cfg.out {
        Some(dir) => {
            write_file(dir, &format!("{}.json", command.name()), text.as_bytes())?;
            for (name, bytes) in &outcome.files {
                write_file(dir, name, bytes)?;
            }
        }
        None => print_stdout(text.as_bytes())?,
    }
    Ok(outcome.code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = config::resolve(&cli.opts).and_then(|cfg| {
        for w in &cfg.warnings {
            eprintln!("warning: {w}");
        }
        if let Some(n) = cfg.workers {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::invalid(format!("cannot start {n} workers: {e}")))?;
        }
        run(cli.command, &cfg)
    });
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}
