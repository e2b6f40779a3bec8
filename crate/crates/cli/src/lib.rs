//! The `fetalign` command line: phantom synthesis, skull segmentation and
//! fitting, registration, probability maps, evaluation and reporting.
//!
//! Data outputs go to files under `--output`; diagnostics go to stderr.

mod analysis;
mod pipeline;
mod plot;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fetalign::config::{parse_methods, PipelineConfig};
use fetalign::dataset::{SubjectId, SubjectRecord};
use fetalign::Error;
use rayon::prelude::*;

#[derive(Debug, Parser)]
#[command(name = "fetalign", version, about = "Fetal head ultrasound registration pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Input directory (cohort, registered outputs or evaluation tables).
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// TOML settings file; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Reference subject, `<id>[.<scan>]` (default 10).
    #[arg(long = "reference-id", global = true)]
    pub reference_id: Option<String>,
    /// Comma-separated registration methods: E, E+A, AFF+I, AFF.
    #[arg(long, global = true)]
    pub methods: Option<String>,
    /// Concave-hull alpha: `auto` or a non-negative number.
    #[arg(long, global = true)]
    pub alpha: Option<String>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Record per-subject failures and continue.
    #[arg(long = "keep-going", global = true)]
    pub keep_going: bool,
    /// Raster format for registered images: png or jpeg.
    #[arg(long, global = true)]
    pub format: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic phantom cohort plus ground-truth transforms.
    Synth {
        /// Number of subjects, reference included.
        #[arg(long, default_value_t = 50)]
        n: usize,
        /// Multiplicative speckle σ.
        #[arg(long, default_value_t = 0.1)]
        speckle: f64,
    },
    /// Write fallback skull masks (`<id>_mask.png`) from the images.
    Segment,
    /// Fit skull ellipses; writes `fits.csv` and overlay images.
    Fit,
    /// Register every subject to the reference with each method.
    Register,
    /// Build per-structure probability maps from registered landmarks.
    Maps {
        /// Comma-separated structures (default: all with more than 2 landmarks).
        #[arg(long)]
        structures: Option<String>,
    },
    /// Compute metric and comparison tables.
    Evaluate {
        /// Output directory of `register`.
        #[arg(long)]
        registered: PathBuf,
    },
    /// Summarize evaluation tables into medians, a markdown report and plots.
    Report,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    /// Bad flags or settings; exit status 2.
    Usage(String),
    /// Runtime failure; exit status 1.
    Fatal(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Fatal(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) => CliError::Usage(e.to_string()),
            other => CliError::Fatal(other.to_string()),
        }
    }
}

pub type CliResult<T = ()> = std::result::Result<T, CliError>;

/// Resolved settings for one invocation.
pub(crate) struct Context {
    pub cfg: PipelineConfig,
}

impl Context {
    fn from_args(g: &GlobalArgs) -> CliResult<Self> {
        let mut cfg = match &g.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(p) = &g.input {
            cfg.input = Some(p.clone());
        }
        if let Some(p) = &g.output {
            cfg.output = Some(p.clone());
        }
        let usage = |e: Error| CliError::Usage(e.to_string());
        if let Some(id) = &g.reference_id {
            cfg.reference_id = id.parse().map_err(usage)?;
        }
        if let Some(m) = &g.methods {
            cfg.methods = parse_methods(m).map_err(usage)?;
        }
        if let Some(a) = &g.alpha {
            cfg.alpha = a.parse().map_err(usage)?;
        }
        if let Some(j) = g.jobs {
            cfg.jobs = j;
        }
        if let Some(s) = g.seed {
            cfg.seed = s;
        }
        if let Some(f) = &g.format {
            cfg.format = f.parse().map_err(usage)?;
        }
        cfg.keep_going |= g.keep_going;
        cfg.validate().map_err(usage)?;
        Ok(Context { cfg })
    }

    pub fn input(&self) -> CliResult<&Path> {
        self.cfg.input.as_deref().ok_or_else(|| CliError::Usage("--input is required".into()))
    }

    pub fn output(&self) -> CliResult<&Path> {
        self.cfg.output.as_deref().ok_or_else(|| CliError::Usage("--output is required".into()))
    }

    /// Runs `f` on every subject in parallel, keeping cohort order. Failures
    /// are fatal unless `keep_going` is set, in which case they are reported
    /// and dropped.
    pub fn per_subject<R: Send>(
        &self,
        subjects: &[&SubjectRecord<f64>],
        what: &str,
        f: impl Fn(&SubjectRecord<f64>) -> fetalign::Result<R> + Sync,
    ) -> CliResult<Vec<(SubjectId, R)>> {
        let results: Vec<(SubjectId, fetalign::Result<R>)> = subjects.par_iter().map(|s| (s.id, f(s))).collect();
        let mut out = Vec::with_capacity(results.len());
        for (id, r) in results {
            match r {
                Ok(v) => out.push((id, v)),
                Err(e) if self.cfg.keep_going => warn(format!("{what} failed for subject {id}: {e}")),
                Err(e) => return Err(CliError::Fatal(format!("{what} failed for subject {id}: {e}"))),
            }
        }
        Ok(out)
    }
}

pub(crate) fn warn(msg: impl AsRef<str>) {
    eprintln!("warning: {}", msg.as_ref());
}

pub(crate) fn create_dir(path: &Path) -> CliResult {
    std::fs::create_dir_all(path).map_err(|e| CliError::Fatal(Error::io(path, e).to_string()))
}

pub(crate) fn write_file(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(|e| CliError::Fatal(Error::io(path, e).to_string()))
}

pub fn run(cli: Cli) -> CliResult {
    let ctx = Context::from_args(&cli.global)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.cfg.jobs)
        .build()
        .map_err(|e| CliError::Fatal(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Synth { n, speckle } => pipeline::synth(&ctx, *n, *speckle),
        Command::Segment => pipeline::segment(&ctx),
        Command::Fit => pipeline::fit(&ctx),
        Command::Register => pipeline::register(&ctx),
        Command::Maps { structures } => analysis::maps(&ctx, structures.as_deref()),
        Command::Evaluate { registered } => analysis::evaluate(&ctx, registered),
        Command::Report => analysis::report(&ctx),
    })
}
