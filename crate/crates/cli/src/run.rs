//! `btnslab run`: seeded experiments with per-seed CSV traces, a merged
//! trace and a JSON summary.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::Context;
use btnslab::experiments::{run_seed_observed, SeedRow, SeedRun};
use btnslab::{ExperimentConfig, ExperimentKind};
use rayon::prelude::*;
use serde::Serialize;
use sha1::{Digest, Sha1};

use crate::Failure;

/// Hash git assigns to a blob with these contents.
pub fn git_blob_sha1(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

fn header(kind: ExperimentKind) -> [&'static str; 5] {
    match kind {
        ExperimentKind::HeisenbergIte => ["sweep", "objective", "bond_max", "wall_ms", "seed"],
        _ => ["iter", "objective", "grad_norm", "wall_ms", "seed"],
    }
}

fn record(row: &SeedRow, seed: u64) -> [String; 5] {
    [row.index.to_string(), row.objective.to_string(), row.aux.to_string(), row.wall_ms.to_string(), seed.to_string()]
}

fn seed_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join("seeds").join(format!("seed-{seed}.csv"))
}

/// Runs one seed, appending and flushing each row of its trace file as it
/// is produced.
fn run_one(cfg: &ExperimentConfig, seed: u64, dir: &Path) -> Result<SeedRun, Failure> {
    let path = seed_path(dir, seed);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header(cfg.experiment)).context("writing CSV header")?;
    w.flush().context("writing CSV header")?;
    let mut io_error: Option<csv::Error> = None;
    let outcome = run_seed_observed(cfg, seed, &mut |row| {
        if io_error.is_none() {
            let res = w.write_record(record(row, seed)).and_then(|_| w.flush().map_err(csv::Error::from));
            io_error = res.err();
        }
    });
    if let Some(e) = io_error {
        return Err(anyhow::Error::new(e).context(format!("writing {}", path.display())).into());
    }
    outcome.map_err(|e| {
        log::error!("seed {seed} failed: {e}");
        Failure::from(e)
    })
}

#[derive(Serialize)]
struct SeedSummary {
    seed: u64,
    final_objective: f64,
    rows: usize,
}

#[derive(Serialize)]
struct Summary {
    experiment: &'static str,
    len: usize,
    best_objective: f64,
    best_seed: u64,
    wall_ms: f64,
    config_hash: String,
    seeds: Vec<SeedSummary>,
}

fn load(path: &Path) -> Result<(ExperimentConfig, Vec<u8>), Failure> {
    let bytes = fs::read(path).map_err(|e| Failure::Validation(format!("reading {}: {e}", path.display())))?;
    let cfg: ExperimentConfig = serde_json::from_slice(&bytes)
        .map_err(|e| Failure::Validation(format!("parsing {}: {e}", path.display())))?;
    cfg.validate().map_err(|e| Failure::Validation(e.to_string()))?;
    Ok((cfg, bytes))
}

pub fn run(config: &Path, out: Option<PathBuf>, threads: Option<usize>) -> Result<(), Failure> {
    let (cfg, bytes) = load(config)?;
    if threads == Some(0) {
        return Err(Failure::Validation("thread count must be positive".into()));
    }
    let dir = out.or_else(|| cfg.output.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("starting worker threads")?;

    let start = Instant::now();
    fs::create_dir_all(dir.join("seeds")).with_context(|| format!("creating {}", dir.display()))?;
    let failure = Mutex::new(None::<Failure>);
    let runs: Vec<Option<SeedRun>> = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| match run_one(&cfg, seed, &dir) {
                Ok(r) => Some(r),
                Err(f) => {
                    let mut slot = failure.lock().expect("poisoned");
                    if slot.is_none() {
                        *slot = Some(f);
                    }
                    None
                }
            })
            .collect()
    });
    if let Some(f) = failure.into_inner().expect("poisoned") {
        return Err(f);
    }
    let runs: Vec<SeedRun> = runs.into_iter().flatten().collect();

    let merged = dir.join("trace.csv");
    let mut w = csv::Writer::from_path(&merged).with_context(|| format!("creating {}", merged.display()))?;
    w.write_record(header(cfg.experiment)).context("writing merged trace")?;
    for run in &runs {
        for row in &run.rows {
            w.write_record(record(row, run.seed)).context("writing merged trace")?;
        }
    }
    w.flush().context("writing merged trace")?;

    let best = runs
        .iter()
        .fold(None::<&SeedRun>, |b, r| match b {
            Some(b) if b.final_objective() <= r.final_objective() => Some(b),
            _ => Some(r),
        })
        .expect("seed list is nonempty");
    let summary = Summary {
        experiment: cfg.experiment.name(),
        len: cfg.len(),
        best_objective: best.final_objective(),
        best_seed: best.seed,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        config_hash: git_blob_sha1(&bytes),
        seeds: runs
            .iter()
            .map(|r| SeedSummary { seed: r.seed, final_objective: r.final_objective(), rows: r.rows.len() })
            .collect(),
    };
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).context("serializing summary")?;
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    println!(
        "{}: best objective {} (seed {}) over {} seeds; outputs in {}",
        summary.experiment,
        summary.best_objective,
        summary.best_seed,
        runs.len(),
        dir.display()
    );
    Ok(())
}
