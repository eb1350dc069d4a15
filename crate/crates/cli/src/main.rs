//! `btnslab`: batch experiments and scripted access to augmented tensor
//! network states.

mod check;
mod run;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use btnslab::models::{model_description, model_state, psi_l_padded, MODEL_NAMES};
use btnslab::variational::truncation_sweep;
use btnslab::ExperimentKind;
use clap::{Parser, Subcommand};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "btnslab", version, about = "Experiments with tensor network states augmented by weight states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's `output`, default `out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for seeds and contractions.
        #[arg(long, env = "BTNSLAB_THREADS")]
        threads: Option<usize>,
    },
    /// List models and experiments.
    ListModels,
    /// Write a reference state and its representations as JSON.
    DumpState {
        model: String,
        /// Ring length for models that take one.
        #[arg(long)]
        len: Option<usize>,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Truncate one edge of a known representation for several weightings
    /// and report the overlap with the untruncated state as CSV.
    PSweep {
        model: String,
        #[arg(long)]
        len: Option<usize>,
        /// Use the bond-4 padded form of the separation-model state.
        #[arg(long)]
        padded: bool,
        #[arg(long, default_value_t = 0)]
        edge: usize,
        #[arg(long)]
        bond: usize,
        /// Weight parameters; defaults to 0.1, 0.2, …, 1.0.
        #[arg(long = "p", num_args = 1..)]
        ps: Vec<f64>,
    },
    /// Run the built-in invariant suite.
    Check,
}

/// Failure classes with distinct exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad input; nothing was written.
    Validation(String),
    /// The numerics broke down (collapse, non-finite values).
    Numeric(String),
    Other(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Numeric(_) => 3,
            Failure::Other(_) => 1,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<btnslab::Error> for Failure {
    fn from(e: btnslab::Error) -> Self {
        use btnslab::Error::*;
        match e {
            Argument(_) | Dimension(_) | Unsupported(_) | Resource(_) => Failure::Validation(e.to_string()),
            DegenerateState(_) | Collapse(_) | Numeric(_) => Failure::Numeric(e.to_string()),
            Internal(_) => Failure::Other(e.into()),
        }
    }
}

fn default_len(model: &str) -> usize {
    match model {
        "separation" => 5,
        "heisenberg" => 8,
        "wstate" => 6,
        _ => 3,
    }
}

#[derive(Serialize)]
struct Dump<'a> {
    name: &'a str,
    shape: &'a btnslab::NetworkShape,
    state: &'a btnslab::Tensor,
    border_bond: &'a [btnslab::models::BondRecord],
    bond: &'a [btnslab::models::BondRecord],
    btns: Option<&'a btnslab::BtnsRep>,
}

/// Writes to stdout, treating a closed pipe as success.
fn write_stdout(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(anyhow::Error::new(e).context("writing stdout").into()),
        _ => Ok(()),
    }
}

fn dump_state(model: &str, len: Option<usize>, out: Option<PathBuf>) -> Result<(), Failure> {
    let k = model_state(model, len.unwrap_or_else(|| default_len(model)))?;
    let dump = Dump {
        name: &k.name,
        shape: &k.shape,
        state: &k.state,
        border_bond: &k.border_bond,
        bond: &k.bond,
        btns: k.btns.as_ref(),
    };
    let text = serde_json::to_string_pretty(&dump).context("serializing state")?;
    match out {
        Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
        None => write_stdout(&text)?,
    }
    Ok(())
}

fn p_sweep(model: &str, len: Option<usize>, padded: bool, edge: usize, bond: usize, ps: Vec<f64>) -> Result<(), Failure> {
    let len = len.unwrap_or_else(|| default_len(model));
    let rep = if padded {
        if model != "separation" {
            return Err(Failure::Validation("only the separation state has a padded form".into()));
        }
        psi_l_padded(len)?
    } else {
        model_state(model, len)?
            .btns
            .ok_or_else(|| Failure::Validation(format!("model {model:?} ships no augmented representation")))?
    };
    let ps = if ps.is_empty() { (1..=10).map(|k| k as f64 / 10.0).collect() } else { ps };
    let rows = truncation_sweep(&rep, edge, bond, &ps)?;
    let mut w = csv::Writer::from_writer(std::io::stdout());
    for r in rows {
        w.serialize(r).context("writing CSV")?;
    }
    w.flush().context("writing CSV")?;
    Ok(())
}

fn list_models() {
    println!("models:");
    for name in MODEL_NAMES {
        println!("  {name:<12} {}", model_description(name).unwrap_or(""));
    }
    println!("experiments:");
    for kind in ExperimentKind::ALL {
        println!("  {:<20} model {}, default L = {}", kind.name(), kind.model(), kind.default_len());
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config, out, threads } => run::run(&config, out, threads),
        Command::ListModels => {
            list_models();
            Ok(())
        }
        Command::DumpState { model, len, out } => dump_state(&model, len, out),
        Command::PSweep { model, len, padded, edge, bond, ps } => p_sweep(&model, len, padded, edge, bond, ps),
        Command::Check => check::check(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Validation(m) => eprintln!("error: invalid input: {m}"),
                Failure::Numeric(m) => eprintln!("error: numeric failure: {m}"),
                Failure::Other(e) => eprintln!("error: {e:#}"),
            }
            ExitCode::from(f.code())
        }
    }
}
