//! `fairdp` command-line front end.
//!
//! Subcommands: `gen` (synthetic data), `single` (one private run), `sweep`
//! (γ × ε grid) and `separation` (sensitivity table). Each accepts
//! `--config FILE` with `key = value` lines; explicit flags win.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.

mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fairdp::dataset::{self, CsvSchema, DataError, SynthConfig};
use fairdp::hypothesis::{build_stump_class, ClassMode, HypothesisError};
use fairdp::inprocess::{self, InprocessError};
use fairdp::metrics::ConstraintMode;
use fairdp::postprocess::{self, PostprocessConfig, PostprocessError};
use fairdp::separation::{self, SeparationError};
use fairdp::sweep::{self, Algorithm, RunSettings, SweepConfig, SweepError};
use fairdp::Dataset;
use thiserror::Error;

use config::{ConfigFile, List};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}: unknown config key '{key}'")]
    UnknownKey { path: PathBuf, line: usize, key: String },
    #[error("{path}:{line}: expected 'key = value'")]
    ConfigSyntax { path: PathBuf, line: usize },
    #[error("cannot read config {path}: {source}")]
    ConfigRead { path: PathBuf, source: io::Error },
    #[error("invalid value '{value}' for '{key}': {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("missing required setting '{0}'")]
    Missing(String),
    #[error("{path}: {source}")]
    Input { path: PathBuf, source: DataError },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Hypothesis(#[from] HypothesisError),
    #[error(transparent)]
    Postprocess(#[from] PostprocessError),
    #[error(transparent)]
    Inprocess(#[from] InprocessError),
    #[error(transparent)]
    Separation(#[from] SeparationError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error("{path}: {source}")]
    Output { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::UnknownKey { .. }
            | Self::ConfigSyntax { .. }
            | Self::ConfigRead { .. }
            | Self::BadValue { .. }
            | Self::Missing(_) => 1,
            Self::Sweep(SweepError::InvalidConfig(_)) => 1,
            _ => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "fairdp", version, about = "Differentially private equalized-odds classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a planted-bias synthetic dataset as CSV.
    Gen(GenArgs),
    /// One private run of either algorithm; prints a report row.
    Single(SingleArgs),
    /// Error/violation over a γ × ε grid, with a per-point summary.
    Sweep(SweepArgs),
    /// Fair-error sensitivity of the blind and aware classes on the
    /// two-group construction.
    Separation(SeparationArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    groups: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    /// Strength of the planted group bias, in [0, 1].
    #[arg(long)]
    bias: Option<f64>,
    /// Output path; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

const GEN_KEYS: &[&str] = &["seed", "m", "groups", "dim", "bias", "out"];

/// Data and algorithm settings shared by `single` and `sweep`.
#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset CSV with a group column and a 0/1 label column.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    group_column: Option<String>,
    #[arg(long)]
    label_column: Option<String>,
    /// Group value to use as the reference group.
    #[arg(long)]
    anchor: Option<String>,
    /// postprocess or inprocess.
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Dual norm bound B of the game.
    #[arg(long)]
    bound: Option<f64>,
    /// odds or fpr.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    thresholds: Option<usize>,
    /// Fixed number of game rounds.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    min_iterations: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    /// Public lower bound on the smallest group-label cell fraction.
    #[arg(long)]
    min_q: Option<f64>,
    /// Add the group indicators and their complements to an A-aware class.
    #[arg(long)]
    extension: bool,
    #[arg(long)]
    seed: Option<u64>,
}

const RUN_KEYS: &[&str] = &[
    "data",
    "group-column",
    "label-column",
    "anchor",
    "algorithm",
    "beta",
    "delta",
    "bound",
    "mode",
    "thresholds",
    "iterations",
    "min-iterations",
    "max-iterations",
    "eta",
    "min-q",
    "extension",
    "seed",
];

#[derive(Args, Debug)]
struct SingleArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    gamma: Option<f64>,
    /// Privacy budget; `inf` gives the non-private baseline.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Report path; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the learned classifier (mixing table or hypothesis weights).
    #[arg(long)]
    classifier: Option<PathBuf>,
    /// Write the per-round game transcript (inprocess only).
    #[arg(long)]
    transcript: Option<PathBuf>,
}

const SINGLE_KEYS: &[&str] = &["gamma", "epsilon", "out", "classifier", "transcript"];

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated γ values.
    #[arg(long)]
    gammas: Option<List<f64>>,
    /// Comma-separated ε values; `inf` allowed.
    #[arg(long)]
    epsilons: Option<List<f64>>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Concatenate this many copies of the dataset first.
    #[arg(long)]
    replicate: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Per-run rows; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-point averages over ok runs.
    #[arg(long)]
    summary: Option<PathBuf>,
}

const SWEEP_KEYS: &[&str] = &["gammas", "epsilons", "repeats", "replicate", "workers", "out", "summary"];

#[derive(Args, Debug)]
struct SeparationArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    gammas: Option<List<f64>>,
    /// Comma-separated sample sizes.
    #[arg(long)]
    ms: Option<List<usize>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

const SEPARATION_KEYS: &[&str] = &["gammas", "ms", "out"];

fn load_config(path: Option<&Path>, groups: &[&[&str]]) -> Result<ConfigFile> {
    let allowed: Vec<&str> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    match path {
        Some(p) => ConfigFile::load(p, &allowed),
        None => Ok(ConfigFile::default()),
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|source| CliError::Output {
            path: p.to_path_buf(),
            source,
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn parse_mode(raw: &str) -> Result<ConstraintMode> {
    match raw {
        "odds" => Ok(ConstraintMode::Odds),
        "fpr" => Ok(ConstraintMode::FprOnly),
        _ => Err(CliError::BadValue {
            key: "mode".into(),
            value: raw.into(),
            reason: "expected odds or fpr".into(),
        }),
    }
}

fn parse_algorithm(raw: &str) -> Result<Algorithm> {
    raw.parse().map_err(|_| CliError::BadValue {
        key: "algorithm".into(),
        value: raw.into(),
        reason: "expected postprocess or inprocess".into(),
    })
}

struct Resolved {
    data: Dataset,
    algorithm: Algorithm,
    settings: RunSettings,
    seed: u64,
}

fn resolve_run(args: &RunArgs, cfg: &ConfigFile) -> Result<Resolved> {
    let defaults = RunSettings::default();
    let path: PathBuf = cfg.pick_required(args.data.clone(), "data")?;
    let schema = CsvSchema {
        group_column: cfg.pick(args.group_column.clone(), "group-column", "group".into())?,
        label_column: cfg.pick(args.label_column.clone(), "label-column", "label".into())?,
        anchor: cfg.pick_opt(args.anchor.clone(), "anchor")?,
    };
    let algorithm = parse_algorithm(&cfg.pick(args.algorithm.clone(), "algorithm", "postprocess".into())?)?;
    let settings = RunSettings {
        beta: cfg.pick(args.beta, "beta", defaults.beta)?,
        delta: cfg.pick(args.delta, "delta", defaults.delta)?,
        bound: cfg.pick(args.bound, "bound", defaults.bound)?,
        mode: parse_mode(&cfg.pick(args.mode.clone(), "mode", "odds".into())?)?,
        thresholds: cfg.pick(args.thresholds, "thresholds", defaults.thresholds)?,
        iterations: cfg.pick_opt(args.iterations, "iterations")?,
        min_iterations: cfg.pick(args.min_iterations, "min-iterations", defaults.min_iterations)?,
        max_iterations: cfg.pick(args.max_iterations, "max-iterations", defaults.max_iterations)?,
        eta: cfg.pick_opt(args.eta, "eta")?,
        min_q: cfg.pick_opt(args.min_q, "min-q")?,
        extension: cfg.pick_switch(args.extension, "extension")?,
    };
    let seed = cfg.pick(args.seed, "seed", 0)?;
    let data = dataset::load_csv(&path, &schema).map_err(|source| CliError::Input { path, source })?;
    Ok(Resolved {
        data,
        algorithm,
        settings,
        seed,
    })
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref(), &[GEN_KEYS])?;
    let synth = SynthConfig {
        seed: cfg.pick(args.seed, "seed", 0)?,
        m: cfg.pick(args.m, "m", 2000)?,
        num_groups: cfg.pick(args.groups, "groups", 2)?,
        dim: cfg.pick(args.dim, "dim", 4)?,
        bias: cfg.pick(args.bias, "bias", 0.3)?,
    };
    let out: Option<PathBuf> = cfg.pick_opt(args.out, "out")?;
    let data = dataset::synth_generate(&synth)?;
    let mut w = open_out(out.as_deref())?;
    data.to_csv_writer(&mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_single(args: SingleArgs) -> Result<()> {
    let cfg = load_config(args.run.config.as_deref(), &[RUN_KEYS, SINGLE_KEYS])?;
    let run = resolve_run(&args.run, &cfg)?;
    let gamma = cfg.pick(args.gamma, "gamma", 0.05)?;
    let epsilon = cfg.pick(args.epsilon, "epsilon", 1.0)?;
    let out: Option<PathBuf> = cfg.pick_opt(args.out, "out")?;
    let classifier: Option<PathBuf> = cfg.pick_opt(args.classifier, "classifier")?;
    let transcript_path: Option<PathBuf> = cfg.pick_opt(args.transcript, "transcript")?;
    let data = &run.data;
    let mut rng = fairdp::seeded_rng(run.seed);

    match run.algorithm {
        Algorithm::Postprocess => {
            let config = PostprocessConfig {
                gamma,
                epsilon,
                beta: run.settings.beta,
            };
            let result = postprocess::dp_postprocess(data, &config, &mut rng)?;
            let mut w = open_out(out.as_deref())?;
            writeln!(w, "{}", postprocess::PostprocessReport::CSV_HEADER)?;
            writeln!(w, "{}", result.report.csv_row())?;
            w.flush()?;
            if let Some(path) = classifier {
                let mut w = open_out(Some(&path))?;
                writeln!(w, "base_prediction,group,p")?;
                for a in 0..data.num_groups() {
                    for yhat in 0..2u8 {
                        writeln!(w, "{yhat},{},{}", data.group_names()[a], result.mixing.get(yhat, a))?;
                    }
                }
                w.flush()?;
            }
            if !result.precondition {
                eprintln!("warning: the accuracy guarantee's data precondition does not hold at this epsilon");
            }
        }
        Algorithm::Inprocess => {
            let s = &run.settings;
            let mode = if s.extension { ClassMode::Aware } else { ClassMode::Blind };
            let class = build_stump_class(data, s.thresholds, mode, s.extension)?;
            let config = s.game_config(gamma, epsilon);
            let candidates = inprocess::game_candidates(&class, data, config.use_labellings)?;
            let tr = inprocess::run_game_on(data, &candidates, &config, &mut rng)?;
            let reference = separation::solve_fair_lp(data, &candidates, gamma, s.mode).ok().map(|o| o.value);
            let report = inprocess::certify_outputs(&tr, data, &candidates, &config, s.extension, reference)?;
            let mut w = open_out(out.as_deref())?;
            writeln!(w, "{}", inprocess::GameReport::CSV_HEADER)?;
            writeln!(w, "{}", report.csv_row())?;
            w.flush()?;
            if let Some(path) = classifier {
                let w = open_out(Some(&path))?;
                tr.q.write_csv(&class, w)?;
            }
            if let Some(path) = transcript_path {
                tr.write_csv(open_out(Some(&path))?)?;
            }
            if tr.min_q_from_data {
                eprintln!("warning: min-q taken from the data; set --min-q to a public bound for a private run");
            }
        }
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let cfg = load_config(args.run.config.as_deref(), &[RUN_KEYS, SWEEP_KEYS])?;
    let run = resolve_run(&args.run, &cfg)?;
    let config = SweepConfig {
        algorithm: run.algorithm,
        gammas: cfg.pick_opt(args.gammas, "gammas")?.map_or_else(sweep::default_gamma_grid, |l| l.0),
        epsilons: cfg.pick_opt(args.epsilons, "epsilons")?.map_or_else(sweep::default_epsilon_grid, |l| l.0),
        repeats: cfg.pick(args.repeats, "repeats", 1)?,
        seed: run.seed,
        replicate: cfg.pick(args.replicate, "replicate", 1)?,
        workers: cfg.pick_opt(args.workers, "workers")?,
        settings: run.settings,
    };
    let out: Option<PathBuf> = cfg.pick_opt(args.out, "out")?;
    let summary: Option<PathBuf> = cfg.pick_opt(args.summary, "summary")?;
    let rows = sweep::run_sweep(&run.data, &config)?;
    let mut w = open_out(out.as_deref())?;
    sweep::write_rows(&rows, &mut w)?;
    w.flush()?;
    if let Some(path) = summary {
        let mut w = open_out(Some(&path))?;
        sweep::write_summary(&sweep::summarize(&rows), &mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn cmd_separation(args: SeparationArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref(), &[SEPARATION_KEYS])?;
    let gammas = cfg.pick(args.gammas, "gammas", List(vec![0.05, 0.1, 0.2]))?;
    let ms = cfg.pick(args.ms, "ms", List(vec![40, 80, 160, 400]))?;
    let out: Option<PathBuf> = cfg.pick_opt(args.out, "out")?;
    let rows = separation::sensitivity_scan(&gammas.0, &ms.0)?;
    let mut w = open_out(out.as_deref())?;
    separation::write_scan_csv(&rows, &mut w)?;
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Single(a) => cmd_single(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Separation(a) => cmd_separation(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
