use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use relaxq::net::DEFAULT_STATE_LIMIT;
use relaxq::pipeline::derive_from_pnml;
use relaxq::sqlgen::SqlConfig;
use relaxq::{
    check_log, constraints_from_matrix, parse_event_log, render_bundle, replay, ConstraintSet,
    QueryMode, RelationMatrix, RelaxationScript,
};

/// Relax behavioral relations of workflow nets into declarative constraints.
#[derive(Parser)]
#[command(name = "relaxq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive the relation matrix of a sound, free-choice PNML net.
    Derive {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_STATE_LIMIT)]
        state_limit: usize,
    },
    /// Apply a relaxation script to a matrix file.
    Relax {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate constraints from a matrix file.
    Constraints {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit MATCH_RECOGNIZE queries for a constraint file.
    Sql {
        #[arg(long)]
        constraints: PathBuf,
        #[arg(long, default_value = "paper")]
        mode: QueryMode,
        /// Qualify the events table with this schema.
        #[arg(long)]
        schema: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an event log against a constraint file.
    Check {
        #[arg(long)]
        constraints: PathBuf,
        #[arg(long)]
        log: PathBuf,
        /// Write the full JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Start the HTTP session service on localhost.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = DEFAULT_STATE_LIMIT)]
        state_limit: usize,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("{}: cannot read", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("{}: cannot write", path.display()))
        }
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .context("cannot write to stdout"),
    }
}

fn load_matrix(path: &Path) -> Result<RelationMatrix> {
    RelationMatrix::from_json(&read(path)?).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn load_constraints(path: &Path) -> Result<ConstraintSet> {
    ConstraintSet::from_json(&read(path)?).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Derive {
            net,
            out,
            state_limit,
        } => {
            let derivation = derive_from_pnml(&read(&net)?, state_limit)
                .map_err(|e| anyhow!("{}: {e}", net.display()))?;
            emit(out.as_deref(), &derivation.matrix.to_json())
        }
        Command::Relax {
            matrix,
            script,
            out,
        } => {
            let base = load_matrix(&matrix)?;
            let ops = RelaxationScript::from_json(&read(&script)?)
                .map_err(|e| anyhow!("{}: {e}", script.display()))?;
            let relaxed = replay(&base, &ops).map_err(|e| anyhow!("{}: {e}", script.display()))?;
            emit(out.as_deref(), &relaxed.to_json())
        }
        Command::Constraints { matrix, out } => {
            let cs = constraints_from_matrix(&load_matrix(&matrix)?)
                .map_err(|e| anyhow!("{}: {e}", matrix.display()))?;
            emit(out.as_deref(), &cs.to_json())
        }
        Command::Sql {
            constraints,
            mode,
            schema,
            out,
        } => {
            let cs = load_constraints(&constraints)?;
            let bundle = render_bundle(&cs, mode, &SqlConfig { schema });
            emit(out.as_deref(), &bundle.script())
        }
        Command::Check {
            constraints,
            log,
            out,
        } => {
            let cs = load_constraints(&constraints)?;
            let traces =
                parse_event_log(&read(&log)?).map_err(|e| anyhow!("{}: {e}", log.display()))?;
            let report = check_log(&traces, &cs).map_err(|e| anyhow!("{}: {e}", log.display()))?;
            if let Some(path) = &out {
                emit(Some(path), &report.to_json())?;
            }
            println!("conformance rate: {}", report.rate_text());
            println!(
                "conforming traces: {}/{}",
                report.conforming,
                report.total()
            );
            for (c, n) in report.constraints.iter().zip(report.violation_counts()) {
                if n > 0 {
                    println!("violated by {n}: {c}");
                }
            }
            Ok(())
        }
        Command::Serve { port, state_limit } => {
            let addr = SocketAddr::from(([127, 0, 0, 1], port));
            let runtime = tokio::runtime::Runtime::new().context("cannot start runtime")?;
            eprintln!("listening on http://{addr}");
            runtime
                .block_on(relaxq_service::serve(addr, state_limit))
                .with_context(|| format!("serving on {addr}"))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::try_parse().unwrap_or_else(|e| e.exit());
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
