//! Error/violation sweeps over grids of fairness and privacy parameters.
//!
//! Every grid point and repeat gets its own seed derived from the base seed,
//! so rows are reproducible individually and independent of scheduling.
//! Points run on a rayon pool; rows come back in grid order.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::Dataset;
use crate::hypothesis::{build_stump_class, CandidateSet, ClassMode, HypothesisError};
use crate::inprocess::{self, GameConfig, InprocessError};
use crate::metrics::ConstraintMode;
use crate::postprocess::{self, PostprocessConfig, PostprocessError};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Hypothesis(#[from] HypothesisError),
    #[error(transparent)]
    Postprocess(#[from] PostprocessError),
    #[error(transparent)]
    Inprocess(#[from] InprocessError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

pub type Result<T> = std::result::Result<T, SweepError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    Postprocess,
    Inprocess,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::Postprocess => "postprocess",
            Self::Inprocess => "inprocess",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "postprocess" => Ok(Self::Postprocess),
            "inprocess" => Ok(Self::Inprocess),
            other => Err(SweepError::InvalidConfig(format!(
                "unknown algorithm {other:?} (expected postprocess or inprocess)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Ok,
    Infeasible,
    PreconditionViolation,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Infeasible => "infeasible",
            Self::PreconditionViolation => "precondition-violation",
        }
    }
}

/// Default γ grid: 21 evenly spaced points on `[0, 0.5]`.
pub fn default_gamma_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 * 0.025).collect()
}

/// Default ε grid.
pub fn default_epsilon_grid() -> Vec<f64> {
    vec![0.5, 1.0, 5.0, f64::INFINITY]
}

/// Parameters shared by every point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub beta: f64,
    pub delta: f64,
    /// `B` for the in-processing game.
    pub bound: f64,
    pub mode: ConstraintMode,
    /// Quantile thresholds per feature in the in-processing stump class.
    pub thresholds: usize,
    pub iterations: Option<usize>,
    pub min_iterations: usize,
    pub max_iterations: usize,
    pub eta: Option<f64>,
    pub min_q: Option<f64>,
    /// Use an A-aware class that includes the group indicators and their
    /// complements.
    pub extension: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        let game = GameConfig::default();
        Self {
            beta: 0.05,
            delta: 1e-7,
            bound: game.bound,
            mode: ConstraintMode::Odds,
            thresholds: 8,
            iterations: None,
            min_iterations: game.min_iterations,
            max_iterations: game.max_iterations,
            eta: None,
            min_q: None,
            extension: false,
        }
    }
}

impl RunSettings {
    pub fn game_config(&self, gamma: f64, epsilon: f64) -> GameConfig {
        GameConfig {
            gamma,
            bound: self.bound,
            epsilon,
            delta: self.delta,
            beta: self.beta,
            mode: self.mode,
            iterations: self.iterations,
            eta: self.eta,
            min_iterations: self.min_iterations,
            max_iterations: self.max_iterations,
            min_q: self.min_q,
            use_labellings: true,
        }
    }

    pub fn postprocess_config(&self, gamma: f64, epsilon: f64) -> PostprocessConfig {
        PostprocessConfig {
            gamma,
            epsilon,
            beta: self.beta,
        }
    }
}

/// Data-dependent state reused across points: the base classifier's
/// predictions or the game's candidate set.
pub enum Prepared {
    Postprocess { base: Vec<u8> },
    Inprocess { candidates: CandidateSet },
}

pub fn prepare(algorithm: Algorithm, data: &Dataset, settings: &RunSettings) -> Result<Prepared> {
    match algorithm {
        Algorithm::Postprocess => Ok(Prepared::Postprocess {
            base: postprocess::train_base(data)?,
        }),
        Algorithm::Inprocess => {
            let mode = if settings.extension { ClassMode::Aware } else { ClassMode::Blind };
            let class = build_stump_class(data, settings.thresholds, mode, settings.extension)?;
            Ok(Prepared::Inprocess {
                candidates: inprocess::game_candidates(&class, data, true)?,
            })
        }
    }
}

/// Realized metrics of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub err_hat: f64,
    pub max_delta_fp: f64,
    pub max_delta_tp: f64,
}

impl Outcome {
    /// Largest constrained rate gap.
    pub fn max_violation(&self, mode: ConstraintMode) -> f64 {
        match mode {
            ConstraintMode::Odds => self.max_delta_fp.max(self.max_delta_tp),
            ConstraintMode::FprOnly => self.max_delta_fp,
        }
    }
}

/// One private run at `(gamma, epsilon)`.
pub fn run_point<R: RngCore + ?Sized>(
    prepared: &Prepared,
    data: &Dataset,
    settings: &RunSettings,
    gamma: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<Outcome> {
    match prepared {
        Prepared::Postprocess { base } => {
            let config = settings.postprocess_config(gamma, epsilon);
            let out = postprocess::dp_postprocess_predictions(data, base, &config, rng)?;
            Ok(Outcome {
                err_hat: out.report.err_hat,
                max_delta_fp: out.report.max_delta_fp,
                max_delta_tp: out.report.max_delta_tp,
            })
        }
        Prepared::Inprocess { candidates } => {
            let config = settings.game_config(gamma, epsilon);
            let tr = inprocess::run_game_on(data, candidates, &config, rng)?;
            let report = inprocess::certify_outputs(&tr, data, candidates, &config, settings.extension, None)?;
            Ok(Outcome {
                err_hat: report.err_hat,
                max_delta_fp: report.max_delta_fp,
                max_delta_tp: report.max_delta_tp,
            })
        }
    }
}

/// Maps a failed run to its row status. Anything that is not a data
/// precondition counts as infeasible.
pub fn status_of(err: &SweepError) -> Status {
    match err {
        SweepError::Postprocess(PostprocessError::PreconditionViolation { .. })
        | SweepError::Inprocess(InprocessError::Degenerate(_))
        | SweepError::Inprocess(InprocessError::ZeroDenominator { .. }) => Status::PreconditionViolation,
        _ => Status::Infeasible,
    }
}

/// Seed of task `index` under `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub algorithm: Algorithm,
    pub gammas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub repeats: usize,
    pub seed: u64,
    /// Copies of the dataset to concatenate before running.
    pub replicate: usize,
    /// Worker threads; `None` uses rayon's default.
    pub workers: Option<usize>,
    pub settings: RunSettings,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Postprocess,
            gammas: default_gamma_grid(),
            epsilons: default_epsilon_grid(),
            repeats: 1,
            seed: 0,
            replicate: 1,
            workers: None,
            settings: RunSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub err_hat: f64,
    pub max_violation: f64,
    pub status: Status,
}

pub const ROW_HEADER: &str = "algorithm,gamma,eps,seed,errHat,maxViolation,status";

impl SweepRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.algorithm,
            self.gamma,
            self.epsilon,
            self.seed,
            self.err_hat,
            self.max_violation,
            self.status.name()
        )
    }
}

/// Runs every `(gamma, epsilon, repeat)` combination. Rows are ordered by
/// epsilon, then gamma, then repeat.
pub fn run_sweep(data: &Dataset, config: &SweepConfig) -> Result<Vec<SweepRow>> {
    if config.gammas.is_empty() || config.epsilons.is_empty() || config.repeats == 0 {
        return Err(SweepError::InvalidConfig("grids and repeat count must be non-empty".into()));
    }
    if let Some(bad) = config.gammas.iter().find(|g| !(0.0..=1.0).contains(*g)) {
        return Err(SweepError::InvalidConfig(format!("gamma {bad} outside [0, 1]")));
    }
    if let Some(bad) = config.epsilons.iter().find(|e| !(**e > 0.0)) {
        return Err(SweepError::InvalidConfig(format!("epsilon {bad} must be positive")));
    }
    let replicated;
    let data = if config.replicate > 1 {
        replicated = data.replicated(config.replicate);
        &replicated
    } else {
        data
    };
    let prepared = prepare(config.algorithm, data, &config.settings)?;

    let mut tasks = Vec::new();
    for &epsilon in &config.epsilons {
        for &gamma in &config.gammas {
            for _ in 0..config.repeats {
                let index = tasks.len() as u64;
                tasks.push((gamma, epsilon, derive_seed(config.seed, index)));
            }
        }
    }
    let run = |&(gamma, epsilon, seed): &(f64, f64, u64)| {
        let mut rng = crate::seeded_rng(seed);
        let (err_hat, max_violation, status) =
            match run_point(&prepared, data, &config.settings, gamma, epsilon, &mut rng) {
                Ok(o) => (o.err_hat, o.max_violation(config.settings.mode), Status::Ok),
                Err(e) => (f64::NAN, f64::NAN, status_of(&e)),
            };
        SweepRow {
            algorithm: config.algorithm,
            gamma,
            epsilon,
            seed,
            err_hat,
            max_violation,
            status,
        }
    };
    match config.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| SweepError::Pool(e.to_string()))?;
            Ok(pool.install(|| tasks.par_iter().map(run).collect()))
        }
        None => Ok(tasks.par_iter().map(run).collect()),
    }
}

/// Averages over the ok repeats of one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub epsilon: f64,
    pub runs: usize,
    pub ok_runs: usize,
    pub mean_err_hat: f64,
    pub mean_max_violation: f64,
}

pub const SUMMARY_HEADER: &str = "algorithm,gamma,eps,runs,okRuns,meanErrHat,meanMaxViolation";

impl SummaryRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.algorithm,
            self.gamma,
            self.epsilon,
            self.runs,
            self.ok_runs,
            self.mean_err_hat,
            self.mean_max_violation
        )
    }
}

/// Groups rows by grid point (first-appearance order) and averages the ok
/// ones. Points without ok rows report NaN means.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut order: Vec<(Algorithm, u64, u64)> = Vec::new();
    let mut acc: BTreeMap<(Algorithm, u64, u64), (usize, usize, f64, f64)> = BTreeMap::new();
    for r in rows {
        let key = (r.algorithm, r.gamma.to_bits(), r.epsilon.to_bits());
        let entry = acc.entry(key).or_insert_with(|| {
            order.push(key);
            (0, 0, 0.0, 0.0)
        });
        entry.0 += 1;
        if r.status == Status::Ok {
            entry.1 += 1;
            entry.2 += r.err_hat;
            entry.3 += r.max_violation;
        }
    }
    order
        .into_iter()
        .map(|key| {
            let (runs, ok, err, viol) = acc[&key];
            let mean = |s: f64| if ok > 0 { s / ok as f64 } else { f64::NAN };
            SummaryRow {
                algorithm: key.0,
                gamma: f64::from_bits(key.1),
                epsilon: f64::from_bits(key.2),
                runs,
                ok_runs: ok,
                mean_err_hat: mean(err),
                mean_max_violation: mean(viol),
            }
        })
        .collect()
}

pub fn write_rows<W: Write>(rows: &[SweepRow], mut out: W) -> Result<()> {
    writeln!(out, "{ROW_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

pub fn write_summary<W: Write>(rows: &[SummaryRow], mut out: W) -> Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_generate, SynthConfig};

    fn synth() -> Dataset {
        synth_generate(&SynthConfig {
            seed: 7,
            m: 600,
            num_groups: 2,
            dim: 3,
            bias: 0.3,
        })
        .unwrap()
    }

    fn small(algorithm: Algorithm) -> SweepConfig {
        SweepConfig {
            algorithm,
            gammas: vec![0.0, 0.1, 1.0],
            epsilons: vec![1.0, f64::INFINITY],
            repeats: 2,
            seed: 11,
            settings: RunSettings {
                iterations: Some(20),
                ..RunSettings::default()
            },
            ..SweepConfig::default()
        }
    }

    #[test]
    fn default_grids() {
        let g = default_gamma_grid();
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[20], 0.5);
        assert_eq!(default_epsilon_grid(), vec![0.5, 1.0, 5.0, f64::INFINITY]);
    }

    #[test]
    fn rows_in_grid_order_and_deterministic() {
        let data = synth();
        for algorithm in [Algorithm::Postprocess, Algorithm::Inprocess] {
            let config = small(algorithm);
            let rows = run_sweep(&data, &config).unwrap();
            assert_eq!(rows.len(), 12);
            assert_eq!((rows[0].gamma, rows[0].epsilon), (0.0, 1.0));
            assert_eq!((rows[2].gamma, rows[2].epsilon), (0.1, 1.0));
            assert_eq!(rows[11].epsilon, f64::INFINITY);
            let serial = run_sweep(&data, &SweepConfig { workers: Some(1), ..config.clone() }).unwrap();
            let as_text = |rows: &[SweepRow]| rows.iter().map(SweepRow::csv_row).collect::<Vec<_>>();
            assert_eq!(as_text(&rows), as_text(&serial));
            for r in &rows {
                assert_eq!(r.status, Status::Ok);
            }
        }
    }

    #[test]
    fn row_seed_reproduces_single_run() {
        let data = synth();
        let config = small(Algorithm::Postprocess);
        let rows = run_sweep(&data, &config).unwrap();
        let prepared = prepare(Algorithm::Postprocess, &data, &config.settings).unwrap();
        let r = &rows[3];
        let mut rng = crate::seeded_rng(r.seed);
        let o = run_point(&prepared, &data, &config.settings, r.gamma, r.epsilon, &mut rng).unwrap();
        assert_eq!(o.err_hat, r.err_hat);
    }

    #[test]
    fn tiny_budget_reports_status() {
        let data = synth();
        let config = SweepConfig {
            gammas: vec![0.0],
            epsilons: vec![1e-4],
            repeats: 5,
            ..small(Algorithm::Postprocess)
        };
        let rows = run_sweep(&data, &config).unwrap();
        assert!(rows.iter().any(|r| r.status != Status::Ok));
        let summary = summarize(&rows);
        assert_eq!(summary.len(), 1);
        assert_eq!(summary[0].runs, 5);
    }

    #[test]
    fn summary_averages_ok_rows_only() {
        let row = |gamma: f64, err: f64, status: Status| SweepRow {
            algorithm: Algorithm::Inprocess,
            gamma,
            epsilon: 1.0,
            seed: 0,
            err_hat: err,
            max_violation: err / 2.0,
            status,
        };
        let rows = vec![
            row(0.1, 0.2, Status::Ok),
            row(0.1, 0.4, Status::Ok),
            row(0.1, f64::NAN, Status::Infeasible),
            row(0.2, f64::NAN, Status::PreconditionViolation),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].runs, s[0].ok_runs), (3, 2));
        assert!((s[0].mean_err_hat - 0.3).abs() < 1e-15);
        assert!((s[0].mean_max_violation - 0.15).abs() < 1e-15);
        assert!(s[1].mean_err_hat.is_nan());
        let mut out = Vec::new();
        write_summary(&s, &mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with(SUMMARY_HEADER));
    }

    #[test]
    fn unconstrained_gamma_matches_base_error() {
        let data = synth();
        let rows = run_sweep(
            &data,
            &SweepConfig {
                gammas: vec![1.0],
                epsilons: vec![f64::INFINITY],
                repeats: 1,
                ..small(Algorithm::Postprocess)
            },
        )
        .unwrap();
        assert!(rows[0].max_violation <= 1.0);
        let base = postprocess::train_base(&data).unwrap();
        let base_err = base.iter().zip(data.labels()).filter(|(p, y)| **p != *y).count() as f64 / data.m() as f64;
        // the group-aware mixing can only improve on the base classifier
        assert!(rows[0].err_hat <= base_err + 1e-12);
    }

    #[test]
    fn algorithm_names_parse() {
        assert_eq!("inprocess".parse::<Algorithm>().unwrap(), Algorithm::Inprocess);
        assert!("logistic".parse::<Algorithm>().is_err());
    }
}
