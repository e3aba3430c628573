//! Command-line runner: TOML config in, JSON report and CSV table out.
//! Dispatch and serialization only; every number comes from `harness`.

use crate::covering::StageWindow;
use crate::error::Error;
use crate::harness;
use crate::lengths::LengthSequenceSpec;
use crate::report::{write_csv, ExperimentReport, Verdict};
use crate::targets::TargetSetSpec;
use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

const AFTER_HELP: &str = "\
CONFIG (TOML):
  experiment = \"verify_covering_lemma\"
  seed = 7
  trials = 10000
  [params]
  eta = 0.015625
  beta = 0.5
  alpha = 0.9
  c = 1.0
  C = 1.0
  [output]            # optional
  dir = \"out\"
  format = \"both\"

EXPERIMENTS and [params] keys:
  verify_moment_lemma       n0, n, spec, window {first, last}
  verify_coincidence_lemma  n0, n, s, t, d
  verify_covering_lemma     eta, beta, alpha, c, C
  dichotomy_experiment      spec, target, level (optional), windows
  prop13_experiment         s, eps, depth, full_first_block (optional)
  prop14_experiment         t, alpha, depth  (trials = sampled points)
  spec:   {variant = \"power_law\", alpha, c, d} | {variant = \"block_constant\", ...}
          | {variant = \"explicit\", values, d}
  target: {variant = \"full_torus\"} | {variant = \"single_point\", x}
          | {variant = \"self_similar_cantor\", ratio_num, ratio_den, copies}

OUTPUT: <dir>/<experiment>.json and <dir>/<experiment>.csv
CSV columns (one row per check, header row always present):
  experiment, check, estimate, lo, hi, theory_value, theory_kind, applicable, verdict
  theory_kind is exact | upper_bound | lower_bound | limit_trend;
  verdict is pass | fail | inconclusive.

EXIT CODES:
  0 pass or inconclusive, 1 fail, 2 parse or validation error, 3 infeasible schedule";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    #[default]
    Both,
}

#[derive(Parser, Debug)]
#[command(name = "randcover", version, about = "Run one covering-set experiment from a TOML config", after_help = AFTER_HELP)]
pub struct Args {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config trial count.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Output directory (default: config [output].dir, else ".").
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", content = "params", rename_all = "snake_case")]
pub enum Experiment {
    VerifyMomentLemma {
        n0: u32,
        n: u32,
        spec: LengthSequenceSpec,
        window: StageWindow,
    },
    VerifyCoincidenceLemma {
        n0: u32,
        n: u32,
        s: f64,
        t: f64,
        d: u32,
    },
    VerifyCoveringLemma {
        eta: f64,
        beta: f64,
        alpha: f64,
        c: f64,
        #[serde(rename = "C")]
        big_c: f64,
    },
    DichotomyExperiment {
        spec: LengthSequenceSpec,
        target: TargetSetSpec,
        #[serde(default)]
        level: Option<u32>,
        windows: Vec<StageWindow>,
    },
    Prop13Experiment {
        s: Vec<f64>,
        eps: Vec<f64>,
        depth: usize,
        #[serde(default)]
        full_first_block: bool,
    },
    Prop14Experiment {
        t: f64,
        alpha: f64,
        depth: usize,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::VerifyMomentLemma { .. } => "verify_moment_lemma",
            Experiment::VerifyCoincidenceLemma { .. } => "verify_coincidence_lemma",
            Experiment::VerifyCoveringLemma { .. } => "verify_covering_lemma",
            Experiment::DichotomyExperiment { .. } => "dichotomy_experiment",
            Experiment::Prop13Experiment { .. } => "prop13_experiment",
            Experiment::Prop14Experiment { .. } => "prop14_experiment",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub experiment: Experiment,
    pub seed: u64,
    pub trials: u64,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Parse(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Run(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Run(Error::Infeasible(_)) => EXIT_INFEASIBLE,
            _ => EXIT_INVALID,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Structural checks; the harness rejects the remaining preconditions
    /// before it draws anything.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be ≥ 1".into()).into());
        }
        match &self.experiment {
            Experiment::VerifyMomentLemma { spec, window, .. } => {
                spec.validate()?;
                StageWindow::new(window.first, window.last)?;
            }
            Experiment::DichotomyExperiment { spec, target, windows, .. } => {
                spec.validate()?;
                target.validate()?;
                if windows.is_empty() {
                    return Err(Error::InvalidArgument("windows must not be empty".into()).into());
                }
                for w in windows {
                    StageWindow::new(w.first, w.last)?;
                }
            }
            Experiment::Prop13Experiment { s, eps, depth, .. } if s.len() < *depth || eps.len() < *depth => {
                return Err(Error::InvalidArgument(format!("s and eps need {depth} entries")).into());
            }
            _ => {}
        }
        Ok(())
    }
}

/// Run the configured experiment in the current thread pool.
pub fn run_report(cfg: &RunConfig) -> crate::Result<ExperimentReport> {
    let (trials, seed) = (cfg.trials, cfg.seed);
    match &cfg.experiment {
        Experiment::VerifyMomentLemma { n0, n, spec, window } => {
            harness::verify_moment_lemma(*n0, *n, spec, *window, trials, seed)
        }
        Experiment::VerifyCoincidenceLemma { n0, n, s, t, d } => {
            harness::verify_coincidence_lemma(*n0, *n, *s, *t, *d, trials, seed)
        }
        Experiment::VerifyCoveringLemma { eta, beta, alpha, c, big_c } => {
            harness::verify_covering_lemma(*eta, *beta, *alpha, *c, *big_c, trials, seed)
        }
        Experiment::DichotomyExperiment { spec, target, level, windows } => {
            harness::dichotomy_experiment(spec, target, *level, windows, trials, seed)
        }
        Experiment::Prop13Experiment { s, eps, depth, full_first_block } => {
            harness::prop13_experiment(s, eps, *depth, trials, seed, *full_first_block)
        }
        Experiment::Prop14Experiment { t, alpha, depth } => harness::prop14_experiment(*t, *alpha, *depth, trials, seed),
    }
}

pub struct Written {
    pub report: ExperimentReport,
    pub files: Vec<PathBuf>,
}

pub fn write_outputs(report: &ExperimentReport, dir: &Path, format: Format) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    if matches!(format, Format::Json | Format::Both) {
        let p = dir.join(format!("{}.json", report.name));
        std::fs::write(&p, report.to_json() + "\n")?;
        files.push(p);
    }
    if matches!(format, Format::Csv | Format::Both) {
        let p = dir.join(format!("{}.csv", report.name));
        let f = std::fs::File::create(&p)?;
        write_csv(std::slice::from_ref(report), f).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
        files.push(p);
    }
    Ok(files)
}

pub fn run(args: &Args) -> Result<Written, CliError> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = RunConfig::from_toml(&text)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    cfg.validate()?;
    let report = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Parse(format!("--threads: {e}")))?
            .install(|| run_report(&cfg))?,
        None => run_report(&cfg)?,
    };
    let dir = args.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    let format = args.format.or(cfg.output.format).unwrap_or_default();
    let files = write_outputs(&report, &dir, format)?;
    Ok(Written { report, files })
}

/// Full entry point; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match run(&args) {
        Ok(w) => {
            let r = &w.report;
            let files: Vec<_> = w.files.iter().map(|p| p.display().to_string()).collect();
            println!(
                "{}: {:?} (estimate {:.6}, theory {:.6}) -> {}",
                r.name,
                r.verdict,
                r.estimate,
                r.theory_value,
                files.join(", ")
            );
            match r.verdict {
                Verdict::Fail => EXIT_FAIL,
                _ => EXIT_OK,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
