//! Private Learner/Auditor game for fair classification.
//!
//! The Lagrangian `L(Q, λ) = err(Q) + λ·r̂(Q)` is solved as a zero-sum game.
//! Each round the Learner best-responds to the Auditor's `λ` by solving a
//! cost-sensitive classification problem through the exponential mechanism,
//! and the Auditor takes an exponentiated-gradient step on Laplace-noised
//! violations of the Learner's choice. The averaged plays form an
//! approximate equilibrium.
//!
//! `epsilon = inf` turns both mechanisms off and yields the non-private
//! exponentiated-gradient reduction.

use std::io::Write;

use rand::RngCore;
use thiserror::Error;

use crate::dataset::Dataset;
use crate::hypothesis::{induce_labellings, CandidateSet, ClassMode, HypothesisClass, HypothesisError, RandomizedClassifier};
use crate::mechanisms::{exponential_mechanism, laplace_sample, BudgetLedger, CompositionMode, MechanismError};
use crate::metrics::{self, ConstraintMode, DualVector, MetricsError, ViolationVector};

#[derive(Debug, Error)]
pub enum InprocessError {
    #[error("invalid game configuration: {0}")]
    InvalidConfig(String),
    #[error("degenerate statistics: min q(a,y) * m = {0} must exceed 1")]
    Degenerate(f64),
    #[error("cost vector undefined: no records with group {group} and label {label}")]
    ZeroDenominator { group: usize, label: u8 },
    #[error(transparent)]
    Hypothesis(#[from] HypothesisError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, InprocessError>;

#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    pub gamma: f64,
    /// `B`, the bound on `‖λ‖₁`.
    pub bound: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub beta: f64,
    pub mode: ConstraintMode,
    /// Overrides the iteration formula.
    pub iterations: Option<usize>,
    /// Overrides `η = ½ sqrt(ln(K+1)/T)`.
    pub eta: Option<f64>,
    /// Clamp for the formula's `T`.
    pub min_iterations: usize,
    pub max_iterations: usize,
    /// Public lower bound on `min q̂_{ay}`. Taken from the data when absent.
    pub min_q: Option<f64>,
    /// Use the induced labellings `H(S)` of an A-blind class as candidates.
    pub use_labellings: bool,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            gamma: 0.05,
            bound: 5.0,
            epsilon: 1.0,
            delta: 1e-7,
            beta: 0.05,
            mode: ConstraintMode::Odds,
            iterations: None,
            eta: None,
            min_iterations: 1,
            max_iterations: 500,
            min_q: None,
            use_labellings: true,
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(InprocessError::InvalidConfig(msg));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma = {} outside [0, 1]", self.gamma));
        }
        if !(self.bound > 0.0 && self.bound.is_finite()) {
            return bad(format!("B = {} must be positive", self.bound));
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon = {} must be positive", self.epsilon));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta = {} outside (0, 1)", self.delta));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad(format!("beta = {} outside (0, 1)", self.beta));
        }
        if self.iterations == Some(0) || self.min_iterations == 0 || self.min_iterations > self.max_iterations {
            return bad("iteration counts must satisfy 1 <= min <= max".into());
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return bad(format!("eta = {eta} must be positive"));
            }
        }
        if let Some(q) = self.min_q {
            if !(q > 0.0 && q <= 1.0) {
                return bad(format!("min_q = {q} outside (0, 1]"));
            }
        }
        Ok(())
    }
}

/// `ln(K + 1)` for `K` violation coordinates; `ln(4|A| - 3)` for equalized odds.
fn log_dim(mode: ConstraintMode, num_groups: usize) -> f64 {
    ((mode.dimension(num_groups) + 1) as f64).ln()
}

/// The closed-form iteration count before flooring:
/// `B sqrt(ln(K+1)) m ε / (2 (2|A|B+1) sqrt(ln(1/δ)) (ln|H| + ln(2/β)))`.
pub fn iteration_formula(config: &GameConfig, num_groups: usize, m: usize, log_h: f64) -> f64 {
    let g = num_groups as f64;
    let b = config.bound;
    b * log_dim(config.mode, num_groups).sqrt() * m as f64 * config.epsilon
        / (2.0 * (2.0 * g * b + 1.0) * (1.0 / config.delta).ln().sqrt() * (log_h + (2.0 / config.beta).ln()))
}

/// Number of rounds and how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationCount {
    pub t: usize,
    /// The closed form before flooring (`inf` when ε = ∞).
    pub raw: f64,
    /// The formula was overridden or clamped.
    pub adjusted: bool,
}

/// `T`: the override if set, else the floored formula clamped to
/// `[min_iterations, max_iterations]`.
pub fn compute_t(config: &GameConfig, num_groups: usize, m: usize, log_h: f64) -> IterationCount {
    let raw = iteration_formula(config, num_groups, m, log_h);
    if let Some(t) = config.iterations {
        return IterationCount { t, raw, adjusted: true };
    }
    let floored = if raw.is_finite() { raw.floor().max(0.0) as usize } else { usize::MAX };
    let t = floored.clamp(config.min_iterations, config.max_iterations);
    IterationCount {
        t,
        raw,
        adjusted: t != floored,
    }
}

/// `η = ½ sqrt(ln(K+1)/T)`.
pub fn default_eta(mode: ConstraintMode, num_groups: usize, t: usize) -> f64 {
    0.5 * (log_dim(mode, num_groups) / t as f64).sqrt()
}

/// Per-round privacy parameter `ε' = ε / (4 sqrt(T ln(1/δ)))`.
pub fn per_round_epsilon(epsilon: f64, delta: f64, t: usize) -> f64 {
    epsilon / (4.0 * (t as f64 * (1.0 / delta).ln()).sqrt())
}

/// Laplace scale on the violations,
/// `8|A| sqrt(T ln(1/δ)) / ((min q̂ m - 1) ε)`.
pub fn violation_noise_scale(num_groups: usize, t: usize, delta: f64, min_q: f64, m: usize, epsilon: f64) -> f64 {
    if epsilon.is_infinite() {
        return 0.0;
    }
    8.0 * num_groups as f64 * (t as f64 * (1.0 / delta).ln()).sqrt() / ((min_q * m as f64 - 1.0) * epsilon)
}

/// Sensitivity of the Learner's loss, `(2|A|B+1)/(min q̂ m - 1)`.
pub fn loss_sensitivity(num_groups: usize, bound: f64, min_q: f64, m: usize) -> f64 {
    (2.0 * num_groups as f64 * bound + 1.0) / (min_q * m as f64 - 1.0)
}

/// Costs of predicting 0 and 1 on one record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostPair {
    pub c0: f64,
    pub c1: f64,
}

/// Cost-sensitive reduction of the Learner's best response to `dual`.
///
/// `C⁰ = 1{Y≠0}`; `C¹ = 1{Y≠1}` plus `(λ_{(A,Y,+)} - λ_{(A,Y,-)})/q̂_{AY}`
/// for `A ≠ 0`, or minus the sum of those differences over `a ≠ 0` divided
/// by `q̂_{0Y}` for `A = 0`. In FPR-only mode records with `Y = 1` carry no
/// λ term.
pub fn cost_vectors(dual: &DualVector, data: &Dataset, mode: ConstraintMode) -> Result<Vec<CostPair>> {
    let extra = cell_extras(dual, data, mode)?;
    Ok(data
        .records()
        .iter()
        .map(|r| CostPair {
            c0: f64::from(r.label != 0),
            c1: f64::from(r.label != 1) + extra[2 * r.group + r.label as usize],
        })
        .collect())
}

/// The λ part of `C¹` per cell `(a, y)`, indexed `2a + y`.
fn cell_extras(dual: &DualVector, data: &Dataset, mode: ConstraintMode) -> Result<Vec<f64>> {
    let g = data.num_groups();
    let expected = mode.dimension(g);
    if dual.len() != expected {
        return Err(MetricsError::DimensionMismatch {
            expected,
            actual: dual.len(),
        }
        .into());
    }
    let q = data.cell_fractions();
    let diff = |a: usize, y: u8| {
        let plus = ViolationVector::coordinate(mode, a, y, true);
        dual.lambda[plus] - dual.lambda[plus + 1]
    };
    let mut term = vec![0.0; 2 * g];
    for y in 0..2u8 {
        if y == 1 && mode == ConstraintMode::FprOnly {
            continue;
        }
        let mut anchor = 0.0;
        for a in 1..g {
            anchor += diff(a, y);
            term[2 * a + y as usize] = diff(a, y);
        }
        term[y as usize] = -anchor;
    }
    for (cell, t) in term.iter_mut().enumerate() {
        if *t != 0.0 {
            if q[cell] <= 0.0 {
                return Err(InprocessError::ZeroDenominator {
                    group: cell / 2,
                    label: (cell % 2) as u8,
                });
            }
            *t /= q[cell];
        }
    }
    Ok(term)
}

/// Round-invariant summaries of the candidates: positive predictions per
/// cell and the violation vector of each point mass.
struct CandidateCache {
    positives: Vec<Vec<f64>>,
    r_hat: Vec<Vec<f64>>,
    label_ones: f64,
}

impl CandidateCache {
    fn new(data: &Dataset, candidates: &CandidateSet, gamma: f64, mode: ConstraintMode) -> Result<Self> {
        let mut positives = Vec::with_capacity(candidates.len());
        let mut r_hat = Vec::with_capacity(candidates.len());
        for (_, preds) in candidates.iter() {
            let soft = metrics::soft(preds);
            positives.push(metrics::cell_positives(&soft, data)?);
            r_hat.push(metrics::violation_vector(&soft, data, gamma, mode)?.r);
        }
        let label_ones = data.labels().filter(|&y| y == 1).count() as f64;
        Ok(Self {
            positives,
            r_hat,
            label_ones,
        })
    }

    /// Same values as [`candidate_losses`], aggregated per cell.
    fn losses(&self, extra: &[f64], candidates: &CandidateSet, m: usize) -> Vec<(usize, f64)> {
        // C¹ - C⁰ is constant on each cell
        let delta: Vec<f64> = extra
            .iter()
            .enumerate()
            .map(|(cell, e)| if cell % 2 == 0 { 1.0 + e } else { e - 1.0 })
            .collect();
        candidates
            .ids()
            .iter()
            .zip(&self.positives)
            .map(|(&id, pos)| {
                let extra: f64 = pos.iter().zip(&delta).map(|(p, d)| p * d).sum();
                (id, (self.label_ones + extra) / m as f64)
            })
            .collect()
    }
}

/// Average cost `(1/m) Σ h C¹ + (1-h) C⁰` of every candidate, equal to
/// `L(h, λ) + γ‖λ‖₁`.
pub fn candidate_losses(costs: &[CostPair], candidates: &CandidateSet) -> Vec<(usize, f64)> {
    let m = costs.len().max(1) as f64;
    let base: f64 = costs.iter().map(|c| c.c0).sum();
    candidates
        .iter()
        .map(|(id, preds)| {
            let extra: f64 = preds
                .iter()
                .zip(costs)
                .filter(|(p, _)| **p == 1)
                .map(|(_, c)| c.c1 - c.c0)
                .sum();
            (id, (base + extra) / m)
        })
        .collect()
}

/// Relative width within which two losses count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

/// Exact minimizer of the losses; lowest id among near-ties.
pub fn argmin_loss(losses: &[(usize, f64)]) -> usize {
    let min = losses.iter().map(|l| l.1).fold(f64::INFINITY, f64::min);
    let tol = TIE_TOLERANCE * min.abs().max(1.0);
    losses
        .iter()
        .filter(|l| l.1 <= min + tol)
        .map(|l| l.0)
        .min()
        .expect("non-empty candidate set")
}

/// Exact cost-sensitive classification oracle.
pub fn csc_exact(costs: &[CostPair], candidates: &CandidateSet) -> usize {
    argmin_loss(&candidate_losses(costs, candidates))
}

/// Private oracle: the exponential mechanism over the candidates' average
/// costs. `epsilon = inf` defers to [`csc_exact`].
pub fn csc_private<R: RngCore + ?Sized>(
    costs: &[CostPair],
    candidates: &CandidateSet,
    epsilon: f64,
    sensitivity: f64,
    rng: &mut R,
) -> Result<usize> {
    let losses = candidate_losses(costs, candidates);
    if epsilon.is_infinite() {
        return Ok(argmin_loss(&losses));
    }
    Ok(exponential_mechanism(rng, &losses, sensitivity, epsilon)?)
}

/// One exponentiated-gradient step: `θ' = θ + η r̃` and the induced `λ'`.
pub fn auditor_step(theta: &[f64], eta: f64, r_tilde: &[f64], bound: f64) -> DualVector {
    let next = theta.iter().zip(r_tilde).map(|(t, r)| t + eta * r).collect();
    DualVector::from_theta(next, bound)
}

/// `r̃ = r̂ + W` with `W_k ~ Lap(scale)` i.i.d.
pub fn noise_violations<R: RngCore + ?Sized>(r_hat: &[f64], scale: f64, rng: &mut R) -> Result<Vec<f64>> {
    r_hat
        .iter()
        .map(|r| Ok(r + laplace_sample(rng, scale)?))
        .collect()
}

/// One round of play.
#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub lambda: Vec<f64>,
    pub hypothesis: usize,
    pub r_hat: Vec<f64>,
    pub r_tilde: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GameTranscript {
    pub rounds: Vec<Round>,
    /// Uniform over the Learner's plays.
    pub q: RandomizedClassifier,
    /// Average of the Auditor's plays.
    pub lambda: Vec<f64>,
    pub iterations: IterationCount,
    pub eta: f64,
    /// `min q̂_{ay}` used for calibration.
    pub min_q: f64,
    /// The calibration value was read from the data rather than supplied.
    pub min_q_from_data: bool,
    /// `ln` of the number of candidates.
    pub log_h: f64,
    pub ledger: BudgetLedger,
}

impl GameTranscript {
    /// Rows `t,hypothesis_id,lambda_k..,r_hat_k..,r_tilde_k..`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let k = self.lambda.len();
        let mut header = vec!["t".to_string(), "hypothesis_id".to_string()];
        for prefix in ["lambda", "r_hat", "r_tilde"] {
            header.extend((0..k).map(|i| format!("{prefix}_{i}")));
        }
        writeln!(out, "{}", header.join(","))?;
        for (t, round) in self.rounds.iter().enumerate() {
            let mut row = vec![(t + 1).to_string(), round.hypothesis.to_string()];
            for values in [&round.lambda, &round.r_hat, &round.r_tilde] {
                row.extend(values.iter().map(f64::to_string));
            }
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Candidates the Learner chooses among: the induced labellings of an
/// A-blind class when enabled, otherwise every member.
pub fn game_candidates(class: &HypothesisClass, data: &Dataset, use_labellings: bool) -> Result<CandidateSet> {
    if use_labellings && class.mode() == ClassMode::Blind {
        Ok(CandidateSet::from_labellings(&induce_labellings(class, data)?))
    } else {
        Ok(CandidateSet::from_class(class, data)?)
    }
}

/// Runs the game on `data` with the Learner restricted to `class`.
pub fn run_game<R: RngCore + ?Sized>(
    data: &Dataset,
    class: &HypothesisClass,
    config: &GameConfig,
    rng: &mut R,
) -> Result<GameTranscript> {
    let candidates = game_candidates(class, data, config.use_labellings)?;
    run_game_on(data, &candidates, config, rng)
}

/// [`run_game`] on a precomputed candidate set.
pub fn run_game_on<R: RngCore + ?Sized>(
    data: &Dataset,
    candidates: &CandidateSet,
    config: &GameConfig,
    rng: &mut R,
) -> Result<GameTranscript> {
    config.validate()?;
    if candidates.is_empty() {
        return Err(InprocessError::InvalidConfig("empty candidate set".into()));
    }
    let g = data.num_groups();
    let m = data.m();
    let (min_q, min_q_from_data) = match config.min_q {
        Some(q) => (q, false),
        None => (data.min_cell_fraction(), true),
    };
    if !(min_q * m as f64 > 1.0) {
        return Err(InprocessError::Degenerate(min_q * m as f64));
    }
    let log_h = (candidates.len() as f64).ln();
    let iterations = compute_t(config, g, m, log_h);
    let t = iterations.t;
    let eta = config.eta.unwrap_or_else(|| default_eta(config.mode, g, t));
    let eps_round = per_round_epsilon(config.epsilon, config.delta, t);
    let sensitivity = loss_sensitivity(g, config.bound, min_q, m);
    let scale = violation_noise_scale(g, t, config.delta, min_q, m, config.epsilon);

    let k = config.mode.dimension(g);
    let mut dual = DualVector::from_theta(vec![0.0; k], config.bound);
    let mut ledger = BudgetLedger::new(CompositionMode::Advanced);
    let mut rounds = Vec::with_capacity(t);
    let mut lambda_sum = vec![0.0; k];
    let cache = CandidateCache::new(data, candidates, config.gamma, config.mode)?;
    for _ in 0..t {
        let extra = cell_extras(&dual, data, config.mode)?;
        let losses = cache.losses(&extra, candidates, m);
        let h = if eps_round.is_infinite() {
            argmin_loss(&losses)
        } else {
            exponential_mechanism(rng, &losses, sensitivity, eps_round)?
        };
        ledger.record(eps_round, 0.0)?;
        let pos = candidates.ids().binary_search(&h).expect("chosen id is a candidate");
        let r_hat = cache.r_hat[pos].clone();
        let r_tilde = noise_violations(&r_hat, scale, rng)?;
        ledger.record(eps_round, 0.0)?;
        for (s, l) in lambda_sum.iter_mut().zip(&dual.lambda) {
            *s += l;
        }
        let next = auditor_step(&dual.theta, eta, &r_tilde, config.bound);
        rounds.push(Round {
            lambda: std::mem::replace(&mut dual, next).lambda,
            hypothesis: h,
            r_hat,
            r_tilde,
        });
    }
    let ids: Vec<usize> = rounds.iter().map(|r| r.hypothesis).collect();
    Ok(GameTranscript {
        q: RandomizedClassifier::uniform(&ids)?,
        lambda: lambda_sum.iter().map(|s| s / t as f64).collect(),
        rounds,
        iterations,
        eta,
        min_q,
        min_q_from_data,
        log_h,
        ledger,
    })
}

/// Approximation parameter `ν` of the averaged plays, the sum of
/// `B ln(K+1)/(ηT)`,
/// `4ηB(1 + 4|A| sqrt(T ln(1/δ)) ln(8T|A|/β)/((min q̂ m - 1)ε))²` and
/// `8(2|A|B+1) sqrt(T ln(1/δ)) (ln|H| + ln(2T/β))/((min q̂ m - 1)ε)`.
/// With ε = ∞ the noise terms vanish.
#[allow(clippy::too_many_arguments)]
pub fn nu(
    config: &GameConfig,
    num_groups: usize,
    m: usize,
    min_q: f64,
    log_h: f64,
    t: usize,
    eta: f64,
) -> f64 {
    let g = num_groups as f64;
    let b = config.bound;
    let tf = t as f64;
    let root = (tf * (1.0 / config.delta).ln()).sqrt();
    let denom = (min_q * m as f64 - 1.0) * config.epsilon;
    let auditor_noise = 4.0 * g * root * (8.0 * tf * g / config.beta).ln() / denom;
    let learner = 8.0 * (2.0 * g * b + 1.0) * root * (log_h + (2.0 * tf / config.beta).ln()) / denom;
    b * log_dim(config.mode, num_groups) / (eta * tf) + 4.0 * eta * b * (1.0 + auditor_noise).powi(2) + learner
}

/// Which fairness guarantee applies to a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// `γ + (1 + 2ν)/B` on every constrained rate gap.
    Standard,
    /// FPR-only with group indicators available and `B > |A| - 1`:
    /// `γ + 2ν/(B - (|A| - 1))`, which is `γ + 2ν` at `B = |A|`.
    Extension,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameReport {
    pub gamma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub bound: f64,
    pub iterations: usize,
    pub eta: f64,
    pub err_hat: f64,
    pub max_delta_fp: f64,
    pub max_delta_tp: f64,
    pub nu: f64,
    pub kind: BoundKind,
    /// Bound on the constrained rate gaps.
    pub fairness_bound: f64,
    /// `err(Q*) + 2ν` when a reference optimum was supplied.
    pub error_bound: Option<f64>,
    pub pass: bool,
}

impl GameReport {
    pub const CSV_HEADER: &'static str = "gamma,eps,delta,B,T,eta,errHat,maxDFP,maxDTP,nuTheoretical,pass";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.gamma,
            self.epsilon,
            self.delta,
            self.bound,
            self.iterations,
            self.eta,
            self.err_hat,
            self.max_delta_fp,
            self.max_delta_tp,
            self.nu,
            self.pass
        )
    }
}

/// Evaluates `Q̃` on the data and checks it against the applicable bounds.
/// `reference_error` is `err(Q*)` of the non-private optimum, if known.
pub fn certify_outputs(
    transcript: &GameTranscript,
    data: &Dataset,
    candidates: &CandidateSet,
    config: &GameConfig,
    has_group_classifiers: bool,
    reference_error: Option<f64>,
) -> Result<GameReport> {
    let g = data.num_groups();
    let soft = transcript.q.soft_predictions_with(candidates)?;
    let err_hat = metrics::error(&soft, data)?;
    let rates = metrics::group_rates(&soft, data, true)?;
    let t = transcript.iterations.t;
    let nu = nu(config, g, data.m(), transcript.min_q, transcript.log_h, t, transcript.eta);
    let extension = config.mode == ConstraintMode::FprOnly
        && has_group_classifiers
        && config.bound > (g - 1) as f64;
    let (kind, fairness_bound) = if extension {
        (BoundKind::Extension, config.gamma + 2.0 * nu / (config.bound - (g - 1) as f64))
    } else {
        (BoundKind::Standard, config.gamma + (1.0 + 2.0 * nu) / config.bound)
    };
    let max_delta_fp = rates.max_delta_fp();
    let max_delta_tp = rates.max_delta_tp();
    let mut pass = max_delta_fp <= fairness_bound;
    if config.mode == ConstraintMode::Odds {
        pass &= max_delta_tp <= fairness_bound;
    }
    let error_bound = reference_error.map(|e| e + 2.0 * nu);
    if let Some(bound) = error_bound {
        pass &= err_hat <= bound;
    }
    Ok(GameReport {
        gamma: config.gamma,
        epsilon: config.epsilon,
        delta: config.delta,
        bound: config.bound,
        iterations: t,
        eta: transcript.eta,
        err_hat,
        max_delta_fp,
        max_delta_tp,
        nu,
        kind,
        fairness_bound,
        error_bound,
        pass,
    })
}

/// Time-averaged regrets of both players over a transcript.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regrets {
    /// `(1/T) Σ L(h_t, λ_t) - min_Q (1/T) Σ L(Q, λ_t)`.
    pub learner: f64,
    /// `max_λ (1/T) Σ L(h_t, λ) - (1/T) Σ L(h_t, λ_t)`.
    pub auditor: f64,
}

/// Regrets measured against the exact, noiseless Lagrangian.
pub fn regrets(
    transcript: &GameTranscript,
    data: &Dataset,
    candidates: &CandidateSet,
    config: &GameConfig,
) -> Result<Regrets> {
    let t = transcript.rounds.len() as f64;
    let mut table = std::collections::HashMap::new();
    for (id, preds) in candidates.iter() {
        let soft = metrics::soft(preds);
        let err = metrics::error(&soft, data)?;
        let r = metrics::violation_vector(&soft, data, config.gamma, config.mode)?.r;
        table.insert(id, (err, r));
    }
    let lagrangian = |id: usize, lambda: &[f64]| {
        let (err, r) = &table[&id];
        err + lambda.iter().zip(r).map(|(l, v)| l * v).sum::<f64>()
    };
    let played = transcript
        .rounds
        .iter()
        .map(|round| lagrangian(round.hypothesis, &round.lambda))
        .sum::<f64>()
        / t;
    // Σ_t L(h, λ_t) / T = L(h, mean λ); the best mixture is a vertex.
    let best_fixed = candidates
        .ids()
        .iter()
        .map(|&id| lagrangian(id, &transcript.lambda))
        .fold(f64::INFINITY, f64::min);
    // Linear in λ, so the best fixed λ is 0 or B on a single coordinate.
    let k = transcript.lambda.len();
    let mut r_avg = vec![0.0; k];
    let mut err_avg = 0.0;
    for round in &transcript.rounds {
        let (err, r) = &table[&round.hypothesis];
        err_avg += err / t;
        for (s, v) in r_avg.iter_mut().zip(r) {
            *s += v / t;
        }
    }
    let best_lambda = err_avg + config.bound * r_avg.iter().copied().fold(0.0, f64::max);
    Ok(Regrets {
        learner: played - best_fixed,
        auditor: best_lambda - played,
    })
}
