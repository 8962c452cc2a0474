//! Command-line front end: `run`, `list` and `check`.
//!
//! Exit codes: 0 when every experiment passes, 2 when any verdict fails or
//! disagrees, 1 on config or runtime errors.

pub mod config;
mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use config::{config_hash, load, parse_config, Experiment, Prepared};
pub use output::{execute, Artifact, Summary, SummaryCheck};

#[derive(Debug, Parser)]
#[command(name = "ergodic", version, about = "Attractive points and ergodic averages of nonexpansive semigroups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the experiments in a config and write traces and summaries.
    ///
    /// Cesaro averages run over T^1 x, ..., T^n x; the start point itself
    /// is not included.
    Run {
        config: PathBuf,
        /// Overrides the seeds in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Multiplies every default tolerance.
        #[arg(long, default_value_t = 1.0)]
        tol_scale: f64,
        /// Worker threads (default: available cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// List mapping kinds, set kinds, schemes and counterexamples.
    List,
    /// Validate a config without running it.
    Check {
        config: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        tol_scale: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub version: String,
    pub seed: Option<u64>,
    pub tol_scale: f64,
    pub wall_time_s: f64,
    /// Paths relative to the output directory.
    pub files: Vec<String>,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub tol_scale: f64,
    pub jobs: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub summaries: Vec<Summary>,
    pub manifest: Manifest,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.manifest.passed
    }
}

pub fn list_builtins() -> String {
    let sections: [(&str, &[&str]); 6] = [
        ("experiments", &["counterexample", "ergodic", "hybrid", "pipeline"]),
        ("mappings", &[
            "affine",
            "compose",
            "piecewise-linear",
            "projection",
            "rotation",
            "shift-remark33",
            "sqrt-section3",
            "translation",
        ]),
        ("sets", &["affine", "ball", "box", "halfline", "halfspace", "intersection", "whole"]),
        ("schemes", &["box", "bump", "cesaro", "weighted"]),
        ("structures", &["commutative", "free-words"]),
        ("counterexamples", &["shift-remark33", "sqrt-section3", "translation"]),
    ];
    let mut out = String::new();
    for (title, items) in sections {
        out.push_str(title);
        out.push_str(":\n");
        for item in items {
            out.push_str("  ");
            out.push_str(item);
            out.push('\n');
        }
    }
    out
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(pool.install(f))
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let path = dir.join(name);
    let parent = path.parent().unwrap_or(dir);
    std::fs::create_dir_all(parent)?;
    let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(&path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Runs every experiment in the config at `path` and writes its outputs.
/// With several experiments each one gets a subdirectory named after it.
pub fn run(path: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    let started = Instant::now();
    let text = std::fs::read_to_string(path)?;
    let hash = config_hash(&text)?;
    let prepared = load(&text, opts.seed, opts.tol_scale)?;
    let nested = prepared.len() > 1;
    let results: Vec<(Summary, Vec<Artifact>)> =
        with_pool(opts.jobs, || prepared.par_iter().map(execute).collect::<Result<Vec<_>>>())??;

    let mut files = Vec::new();
    for (prep, (summary, artifacts)) in prepared.iter().zip(&results) {
        let prefix = if nested { format!("{}/", prep.name) } else { String::new() };
        for a in artifacts {
            let rel = format!("{prefix}{}", a.name);
            write_atomic(&opts.out_dir, &rel, &a.bytes)?;
            files.push(rel);
        }
        let rel = format!("{prefix}summary.json");
        write_atomic(&opts.out_dir, &rel, &summary.to_json()?)?;
        files.push(rel);
    }
    let summaries: Vec<Summary> = results.into_iter().map(|(s, _)| s).collect();
    files.push("manifest.json".into());
    let manifest = Manifest {
        config_hash: hash,
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: opts.seed,
        tol_scale: opts.tol_scale,
        wall_time_s: started.elapsed().as_secs_f64(),
        files,
        passed: summaries.iter().all(|s| s.passed),
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    write_atomic(&opts.out_dir, "manifest.json", &bytes)?;
    Ok(RunOutcome { summaries, manifest })
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match cli.command {
        Command::List => {
            print!("{}", list_builtins());
            0
        }
        Command::Check { config, tol_scale } => {
            let checked = std::fs::read_to_string(&config)
                .map_err(Error::from)
                .and_then(|text| load(&text, None, tol_scale));
            match checked {
                Ok(p) => {
                    for e in &p {
                        println!("ok {} ({})", e.name, e.experiment.kind());
                    }
                    0
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            }
        }
        Command::Run { config, seed, out_dir, tol_scale, jobs } => {
            let opts = RunOptions { seed, out_dir, tol_scale, jobs };
            match run(&config, &opts) {
                Ok(outcome) => {
                    for s in &outcome.summaries {
                        println!("{} {} {}", if s.passed { "PASS" } else { "FAIL" }, s.name, s.verdict);
                    }
                    if outcome.passed() {
                        0
                    } else {
                        2
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    1
                }
            }
        }
    }
}
