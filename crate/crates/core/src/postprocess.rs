//! Private post-processing of a fixed base classifier.
//!
//! The joint table `q̂_{ŷay}` of the base classifier's predictions is
//! released once through the Laplace mechanism. A linear program over the
//! mixing probabilities `p_{ŷa} = P[Ŷ_p = 1 | Ŷ = ŷ, A = a]` is then solved on
//! the noisy table, with fairness constraints loosened by a slack that covers
//! the noise. Everything after the release is post-processing and costs no
//! additional privacy.

use std::fmt;

use rand::Rng as _;
use rand::RngCore;
use thiserror::Error;

use crate::dataset::{joint_stats, DataError, Dataset, JointStats};
use crate::hypothesis::{HypothesisKind, Polarity};
use crate::lp::{self, LinearProgram, LpError, LpStatus};
use crate::mechanisms::{laplace_sample, BudgetLedger, CompositionMode, MechanismError};
use crate::metrics::{self, MetricsError};

#[derive(Debug, Error)]
pub enum PostprocessError {
    #[error("precondition violated: perturbed q(A={group}, Y={label}) = {value} is not positive; use a larger epsilon")]
    PreconditionViolation { group: usize, label: u8, value: f64 },
    #[error("fairness LP infeasible at gamma = {gamma}, epsilon = {epsilon}; try a larger epsilon or gamma")]
    Infeasible { gamma: f64, epsilon: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

pub type Result<T> = std::result::Result<T, PostprocessError>;

/// A base classifier trained on `(X, Y)` only.
pub trait BaseClassifier {
    /// Predictions on the training records.
    fn fit_predict(&self, data: &Dataset) -> Result<Vec<u8>>;
}

/// Exact empirical risk minimization over all decision stumps on the
/// features (plus the two constants).
#[derive(Debug, Clone, Copy, Default)]
pub struct StumpErm;

impl BaseClassifier for StumpErm {
    fn fit_predict(&self, data: &Dataset) -> Result<Vec<u8>> {
        let h = erm_stump(data);
        let hyp = crate::hypothesis::Hypothesis { id: 0, kind: h };
        data.records()
            .iter()
            .map(|r| hyp.predict(&r.x, None).map_err(|e| PostprocessError::InvalidParameter(e.to_string())))
            .collect()
    }
}

/// The stump (or constant) with the fewest training mistakes.
///
/// Thresholds are midpoints between consecutive distinct feature values.
/// Ties keep the first candidate in the order constants, then features,
/// thresholds ascending, positive polarity before negative.
pub fn erm_stump(data: &Dataset) -> HypothesisKind {
    let m = data.m();
    let positives = data.labels().filter(|&y| y == 1).count();
    let mut best = (m - positives, HypothesisKind::Constant(1));
    if positives <= m - positives {
        best = (positives, HypothesisKind::Constant(0));
    }
    let mut order: Vec<usize> = (0..m).collect();
    for feature in 0..data.dim() {
        let value = |i: usize| data.record(i).x[feature];
        order.sort_by(|&i, &j| value(i).total_cmp(&value(j)));
        // Positive polarity with the threshold below everything predicts 1.
        let mut pos_err = m - positives;
        for k in 0..m.saturating_sub(1) {
            let i = order[k];
            if data.record(i).label == 1 {
                pos_err += 1;
            } else {
                pos_err -= 1;
            }
            let (lo, hi) = (value(i), value(order[k + 1]));
            if lo == hi {
                continue;
            }
            let threshold = lo + (hi - lo) / 2.0;
            for (err, polarity) in [(pos_err, Polarity::Positive), (m - pos_err, Polarity::Negative)] {
                if err < best.0 {
                    best = (
                        err,
                        HypothesisKind::Stump {
                            feature,
                            threshold,
                            polarity,
                        },
                    );
                }
            }
        }
    }
    best.1
}

/// Predictions of the default base classifier.
pub fn train_base(data: &Dataset) -> Result<Vec<u8>> {
    StumpErm.fit_predict(data)
}

/// Mixing probabilities `p_{ŷa}`, stored at index `2a + ŷ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingParams {
    pub p: Vec<f64>,
}

impl MixingParams {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.len() % 2 != 0 || p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(PostprocessError::InvalidParameter(format!("mixing vector {p:?}")));
        }
        Ok(Self { p })
    }

    /// `Ŷ_p = Ŷ`.
    pub fn identity(num_groups: usize) -> Self {
        Self {
            p: (0..2 * num_groups).map(|i| (i % 2) as f64).collect(),
        }
    }

    pub fn num_groups(&self) -> usize {
        self.p.len() / 2
    }

    pub fn get(&self, yhat: u8, a: usize) -> f64 {
        self.p[2 * a + yhat as usize]
    }

    /// `P[Ŷ_p = 1]` per record.
    pub fn soft_predictions(&self, base: &[u8], data: &Dataset) -> Vec<f64> {
        base.iter().zip(data.records()).map(|(&b, r)| self.get(b, r.group)).collect()
    }
}

impl fmt::Display for MixingParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in 0..self.num_groups() {
            if a > 0 {
                write!(f, " ")?;
            }
            write!(f, "p0{a}={:.6} p1{a}={:.6}", self.get(0, a), self.get(1, a))?;
        }
        Ok(())
    }
}

/// Draws `Ŷ_p` for one individual with base prediction `base_bit`.
pub fn derived_predict<R: RngCore + ?Sized>(
    mixing: &MixingParams,
    base_bit: u8,
    group: usize,
    rng: &mut R,
) -> u8 {
    u8::from(rng.random::<f64>() < mixing.get(base_bit, group))
}

/// The noisy joint table with the fairness slacks it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedStats {
    pub stats: JointStats,
    /// Per group `a`, `4 ln(4|A|/β) / (min{q̃_{a0}, q̃_{00}} m ε)`.
    pub slack_fp: Vec<f64>,
    /// Per group `a`, `4 ln(4|A|/β) / (min{q̃_{a1}, q̃_{01}} m ε)`.
    pub slack_tp: Vec<f64>,
}

/// Laplace scale per cell, `2/(mε)`.
pub fn noise_scale(m: usize, epsilon: f64) -> f64 {
    2.0 / (m as f64 * epsilon)
}

/// `4 ln(4|A|/β) / (min_q m ε)`.
pub fn slack(num_groups: usize, beta: f64, m: usize, epsilon: f64, min_q: f64) -> f64 {
    4.0 * (4.0 * num_groups as f64 / beta).ln() / (min_q * m as f64 * epsilon)
}

/// Adds `Lap(2/(mε))` to every cell of `stats` (cells in table order) and
/// computes the slacks. Fails when a perturbed marginal is not positive.
pub fn perturb_stats<R: RngCore + ?Sized>(
    stats: &JointStats,
    epsilon: f64,
    beta: f64,
    m: usize,
    rng: &mut R,
) -> Result<PerturbedStats> {
    let scale = if epsilon.is_infinite() { 0.0 } else { noise_scale(m, epsilon) };
    let mut q3 = stats.table().to_vec();
    for cell in q3.iter_mut() {
        *cell += laplace_sample(rng, scale)?;
    }
    with_slacks(JointStats::from_table(stats.num_groups(), q3), epsilon, beta, m)
}

fn with_slacks(stats: JointStats, epsilon: f64, beta: f64, m: usize) -> Result<PerturbedStats> {
    let g = stats.num_groups();
    for a in 0..g {
        for y in 0..2u8 {
            let value = stats.q_ay(a, y);
            if !(value > 0.0) {
                return Err(PostprocessError::PreconditionViolation { group: a, label: y, value });
            }
        }
    }
    let slack_for = |a: usize, y: u8| slack(g, beta, m, epsilon, stats.q_ay(a, y).min(stats.q_ay(0, y)));
    let slack_fp = (0..g).map(|a| slack_for(a, 0)).collect();
    let slack_tp = (0..g).map(|a| slack_for(a, 1)).collect();
    Ok(PerturbedStats {
        stats,
        slack_fp,
        slack_tp,
    })
}

/// The fairness LP on table `stats` with per-group slacks. Variable order
/// matches [`MixingParams`].
fn fairness_lp(stats: &JointStats, gamma: f64, slack_fp: &[f64], slack_tp: &[f64]) -> LinearProgram {
    let g = stats.num_groups();
    let mut objective = vec![0.0; 2 * g];
    let mut constant = 0.0;
    for a in 0..g {
        for yhat in 0..2u8 {
            objective[2 * a + yhat as usize] = stats.q(yhat, a, 0) - stats.q(yhat, a, 1);
            constant += stats.q(yhat, a, 1);
        }
    }
    let mut lp = LinearProgram::new(objective);
    lp.constant = constant;
    // Rate of Ŷ_p on cell (a, y) is r p_{1a} + (1 - r) p_{0a}, r the base rate.
    let base_rate = |a: usize, y: u8| stats.q(1, a, y) / stats.q_ay(a, y);
    for a in 1..g {
        for (y, slacks) in [(0u8, slack_fp), (1u8, slack_tp)] {
            let (ra, r0) = (base_rate(a, y), base_rate(0, y));
            let mut row = vec![0.0; 2 * g];
            row[2 * a + 1] += ra;
            row[2 * a] += 1.0 - ra;
            row[1] -= r0;
            row[0] -= 1.0 - r0;
            lp.add_abs_constraint(row, gamma + slacks[a]);
        }
    }
    lp
}

/// The private LP on the perturbed table.
pub fn build_private_lp(pstats: &PerturbedStats, gamma: f64) -> LinearProgram {
    fairness_lp(&pstats.stats, gamma, &pstats.slack_fp, &pstats.slack_tp)
}

/// The non-private LP on the exact table, no slack.
pub fn build_empirical_lp(stats: &JointStats, gamma: f64) -> LinearProgram {
    let zeros = vec![0.0; stats.num_groups()];
    fairness_lp(stats, gamma, &zeros, &zeros)
}

/// Solves `lp`, mapping infeasibility to an error.
fn solve_mixing(lp: &LinearProgram, gamma: f64, epsilon: f64) -> Result<(MixingParams, f64)> {
    let sol = lp::solve(lp)?;
    match sol.status {
        LpStatus::Optimal => Ok((MixingParams { p: sol.p }, sol.value)),
        _ => Err(PostprocessError::Infeasible { gamma, epsilon }),
    }
}

/// Optimal non-private mixing and its empirical error.
pub fn empirical_optimum(stats: &JointStats, gamma: f64) -> Result<(MixingParams, f64)> {
    solve_mixing(&build_empirical_lp(stats, gamma), gamma, f64::INFINITY)
}

/// Accuracy guarantees of the private post-processing for one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GuaranteeBounds {
    /// `min q̂_{ay} > 4 ln(4|A|/β)/(mε)`.
    pub precondition: bool,
    /// Additive excess error `24|A| ln(4|A|/β)/(mε)`.
    pub excess_error: f64,
    /// Per group `γ + 8L / (min{q̂_{a0}, q̂_{00}} m ε - 4L)`, `L = ln(4|A|/β)`.
    pub fp_bound: Vec<f64>,
    /// TP analogue of `fp_bound`.
    pub tp_bound: Vec<f64>,
}

pub fn guarantee_bounds(stats: &JointStats, m: usize, epsilon: f64, beta: f64, gamma: f64) -> GuaranteeBounds {
    let g = stats.num_groups();
    let l = (4.0 * g as f64 / beta).ln();
    let me = m as f64 * epsilon;
    let bound_for = |a: usize, y: u8| {
        let q = stats.q_ay(a, y).min(stats.q_ay(0, y));
        let denom = q * me - 4.0 * l;
        if epsilon.is_infinite() {
            gamma
        } else if denom > 0.0 {
            gamma + 8.0 * l / denom
        } else {
            f64::INFINITY
        }
    };
    GuaranteeBounds {
        precondition: stats.min_q() > 4.0 * l / me,
        excess_error: 24.0 * g as f64 * l / me,
        fp_bound: (0..g).map(|a| bound_for(a, 0)).collect(),
        tp_bound: (0..g).map(|a| bound_for(a, 1)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostprocessConfig {
    pub gamma: f64,
    pub epsilon: f64,
    pub beta: f64,
}

impl PostprocessConfig {
    fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(PostprocessError::InvalidParameter(format!("gamma = {}", self.gamma)));
        }
        if !(self.epsilon > 0.0) {
            return Err(PostprocessError::InvalidParameter(format!("epsilon = {}", self.epsilon)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(PostprocessError::InvalidParameter(format!("beta = {}", self.beta)));
        }
        Ok(())
    }
}

/// Outcome of one post-processing run.
#[derive(Debug, Clone, PartialEq)]
pub struct PostprocessReport {
    pub gamma: f64,
    pub epsilon: f64,
    pub beta: f64,
    /// LP value on the noisy table.
    pub err_tilde: f64,
    /// Realized empirical error of `Ŷ_p̃*`.
    pub err_hat: f64,
    pub max_delta_fp: f64,
    pub max_delta_tp: f64,
    pub status: String,
}

impl PostprocessReport {
    pub const CSV_HEADER: &'static str = "gamma,eps,beta,errTilde,errHat,maxDeltaFP,maxDeltaTP,status";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.gamma,
            self.epsilon,
            self.beta,
            self.err_tilde,
            self.err_hat,
            self.max_delta_fp,
            self.max_delta_tp,
            self.status
        )
    }
}

#[derive(Debug, Clone)]
pub struct PostprocessOutput {
    pub mixing: MixingParams,
    pub report: PostprocessReport,
    pub perturbed: PerturbedStats,
    pub ledger: BudgetLedger,
    /// Whether the data precondition of the accuracy guarantee holds.
    pub precondition: bool,
}

/// Private post-processing of given base predictions.
pub fn dp_postprocess_predictions<R: RngCore + ?Sized>(
    data: &Dataset,
    base: &[u8],
    config: &PostprocessConfig,
    rng: &mut R,
) -> Result<PostprocessOutput> {
    config.check()?;
    let stats = joint_stats(data, base)?;
    let m = data.m();
    let mut ledger = BudgetLedger::new(CompositionMode::Basic);
    ledger.record(config.epsilon, 0.0)?;
    let perturbed = perturb_stats(&stats, config.epsilon, config.beta, m, rng)?;
    let lp = build_private_lp(&perturbed, config.gamma);
    let (mixing, err_tilde) = solve_mixing(&lp, config.gamma, config.epsilon)?;
    let soft = mixing.soft_predictions(base, data);
    let rates = metrics::group_rates(&soft, data, true)?;
    let report = PostprocessReport {
        gamma: config.gamma,
        epsilon: config.epsilon,
        beta: config.beta,
        err_tilde,
        err_hat: metrics::error(&soft, data)?,
        max_delta_fp: rates.max_delta_fp(),
        max_delta_tp: rates.max_delta_tp(),
        status: "ok".into(),
    };
    let precondition = guarantee_bounds(&stats, m, config.epsilon, config.beta, config.gamma).precondition;
    Ok(PostprocessOutput {
        mixing,
        report,
        perturbed,
        ledger,
        precondition,
    })
}

/// Trains the default base classifier, then post-processes it privately.
pub fn dp_postprocess<R: RngCore + ?Sized>(
    data: &Dataset,
    config: &PostprocessConfig,
    rng: &mut R,
) -> Result<PostprocessOutput> {
    let base = train_base(data)?;
    dp_postprocess_predictions(data, &base, config, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_generate, Record, SynthConfig};
    use crate::hypothesis::Hypothesis;
    use crate::seeded_rng;

    fn synth(seed: u64, m: usize) -> Dataset {
        synth_generate(&SynthConfig {
            seed,
            m,
            num_groups: 2,
            dim: 4,
            bias: 0.3,
        })
        .unwrap()
    }

    fn config(gamma: f64, epsilon: f64) -> PostprocessConfig {
        PostprocessConfig {
            gamma,
            epsilon,
            beta: 0.05,
        }
    }

    /// Mistakes of every candidate, by direct evaluation.
    fn brute_force_best(data: &Dataset) -> usize {
        let mut kinds = vec![HypothesisKind::Constant(0), HypothesisKind::Constant(1)];
        for feature in 0..data.dim() {
            for r in data.records() {
                for polarity in [Polarity::Positive, Polarity::Negative] {
                    kinds.push(HypothesisKind::Stump {
                        feature,
                        threshold: r.x[feature],
                        polarity,
                    });
                }
            }
        }
        kinds
            .into_iter()
            .map(|kind| {
                let h = Hypothesis { id: 0, kind };
                data.records()
                    .iter()
                    .filter(|r| h.predict(&r.x, None).unwrap() != r.label)
                    .count()
            })
            .min()
            .unwrap()
    }

    fn mistakes(data: &Dataset, preds: &[u8]) -> usize {
        preds.iter().zip(data.labels()).filter(|(p, y)| **p != *y).count()
    }

    #[test]
    fn erm_separable_is_exact() {
        let records = (0..10)
            .map(|i| Record::new(vec![i as f64], i % 2, u8::from(i >= 6)))
            .collect();
        let data = Dataset::new(records, 2, 1).unwrap();
        let preds = train_base(&data).unwrap();
        assert_eq!(mistakes(&data, &preds), 0);
        assert_eq!(preds, train_base(&data).unwrap());
    }

    #[test]
    fn erm_matches_brute_force() {
        for seed in 0..5 {
            let data = synth(seed, 60);
            let preds = train_base(&data).unwrap();
            assert_eq!(mistakes(&data, &preds), brute_force_best(&data));
        }
    }

    #[test]
    fn erm_on_uninformative_features() {
        let data = synth(3, 2000);
        let mut rng = seeded_rng(5);
        let records: Vec<Record> = data
            .records()
            .iter()
            .map(|r| Record::new(r.x.clone(), r.group, u8::from(rng.random::<f64>() < 0.3)))
            .collect();
        let shuffled = Dataset::new(records, 2, 4).unwrap();
        let prior = shuffled.labels().filter(|&y| y == 1).count() as f64 / 2000.0;
        let err = mistakes(&shuffled, &train_base(&shuffled).unwrap()) as f64 / 2000.0;
        assert!((err - prior.min(1.0 - prior)).abs() <= 0.1);
    }

    #[test]
    fn slack_formula() {
        let s = slack(2, 0.05, 1000, 1.0, 0.2);
        assert!((s - 0.10150347630467653).abs() < 1e-15);
        assert_eq!(slack(2, 0.05, 1000, f64::INFINITY, 0.2), 0.0);
    }

    #[test]
    fn lp_shape() {
        let data = synth(1, 500);
        let stats = joint_stats(&data, &train_base(&data).unwrap()).unwrap();
        let lp = build_empirical_lp(&stats, 0.1);
        assert_eq!(lp.num_vars(), 4);
        assert_eq!(lp.constraints.len(), 4);
        assert!(lp.bounds.iter().all(|&b| b == (0.0, 1.0)));
    }

    #[test]
    fn infinite_epsilon_is_empirical_lp() {
        let data = synth(2, 1500);
        let base = train_base(&data).unwrap();
        let stats = joint_stats(&data, &base).unwrap();
        for gamma in [0.0, 0.02, 0.1] {
            let out = dp_postprocess_predictions(&data, &base, &config(gamma, f64::INFINITY), &mut seeded_rng(0)).unwrap();
            assert_eq!(out.perturbed.stats, stats);
            let (p_hat, value) = empirical_optimum(&stats, gamma).unwrap();
            assert_eq!(out.mixing, p_hat);
            assert_eq!(out.report.err_tilde, value);
            assert!((out.report.err_hat - out.report.err_tilde).abs() < 1e-12);
            assert!(out.report.max_delta_fp <= gamma + 1e-9);
            assert!(out.report.max_delta_tp <= gamma + 1e-9);
        }
    }

    #[test]
    fn loose_gamma_is_cellwise_majority() {
        let data = synth(4, 1000);
        let base = train_base(&data).unwrap();
        let stats = joint_stats(&data, &base).unwrap();
        let (p, value) = empirical_optimum(&stats, 1.0).unwrap();
        // unconstrained: each (ŷ, a) cell predicts its majority label
        let mut expected = 0.0;
        for a in 0..2 {
            for yhat in 0..2u8 {
                let (q0, q1) = (stats.q(yhat, a, 0), stats.q(yhat, a, 1));
                expected += q0.min(q1);
                assert_eq!(p.get(yhat, a), if q1 > q0 { 1.0 } else { 0.0 });
            }
        }
        assert!((value - expected).abs() < 1e-12);
    }

    #[test]
    fn loose_gamma_keeps_optimal_base() {
        // base is right on 3 of 4 records in every (ŷ, a) cell
        let mut records = Vec::new();
        let mut base = Vec::new();
        for a in 0..2 {
            for yhat in 0..2u8 {
                for k in 0..4 {
                    let y = if k == 0 { 1 - yhat } else { yhat };
                    records.push(Record::new(vec![0.0], a, y));
                    base.push(yhat);
                }
            }
        }
        let data = Dataset::new(records, 2, 1).unwrap();
        let stats = joint_stats(&data, &base).unwrap();
        let (p, value) = empirical_optimum(&stats, 1.0).unwrap();
        assert_eq!(p, MixingParams::identity(2));
        let identity = build_empirical_lp(&stats, 1.0).value_at(&MixingParams::identity(2).p);
        assert!((value - identity).abs() < 1e-12);
        assert!((identity - 0.25).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_marginal_rejected() {
        let mut q3 = vec![0.1; 8];
        q3[JointStats::index(2, 0, 1, 1)] = -0.2;
        let stats = JointStats::from_table(2, q3);
        let err = perturb_stats(&stats, f64::INFINITY, 0.05, 100, &mut seeded_rng(0)).unwrap_err();
        assert!(matches!(
            err,
            PostprocessError::PreconditionViolation { group: 1, label: 1, .. }
        ));
    }

    #[test]
    fn perturbation_reproducible_and_bounded() {
        let data = synth(6, 2000);
        let stats = joint_stats(&data, &train_base(&data).unwrap()).unwrap();
        let a = perturb_stats(&stats, 1.0, 0.05, 2000, &mut seeded_rng(9)).unwrap();
        let b = perturb_stats(&stats, 1.0, 0.05, 2000, &mut seeded_rng(9)).unwrap();
        assert_eq!(a, b);
        let bound = (8.0f64 / 0.05).ln() * noise_scale(2000, 1.0);
        let mut rng = seeded_rng(10);
        let trials = 10_000;
        let within = (0..trials)
            .filter(|_| {
                let p = perturb_stats(&stats, 1.0, 0.05, 2000, &mut rng).unwrap();
                p.stats.table().iter().zip(stats.table()).all(|(x, y)| (x - y).abs() <= bound)
            })
            .count();
        assert!(within as f64 / trials as f64 >= 0.95);
    }

    #[test]
    fn derived_classifier_semantics() {
        let mut rng = seeded_rng(1);
        let id = MixingParams::identity(3);
        for a in 0..3 {
            for b in 0..2u8 {
                assert_eq!(derived_predict(&id, b, a, &mut rng), b);
                assert_eq!(derived_predict(&MixingParams::new(vec![0.0; 6]).unwrap(), b, a, &mut rng), 0);
            }
        }
        let data = synth(7, 300);
        let base = train_base(&data).unwrap();
        let coin = MixingParams::new(vec![0.5; 4]).unwrap();
        let rates = metrics::group_rates(&coin.soft_predictions(&base, &data), &data, true).unwrap();
        assert_eq!(rates.max_delta_fp(), 0.0);
        assert_eq!(rates.max_delta_tp(), 0.0);
    }

    /// The noiseless optimum stays feasible in the noisy LP, and the noisy
    /// objective tracks the true one, with the advertised probability.
    #[test]
    fn noisy_lp_tracks_empirical_lp() {
        let data = synth(8, 2000);
        let m = data.m();
        let (eps, beta, gamma) = (1.0, 0.05, 0.05);
        let stats = joint_stats(&data, &train_base(&data).unwrap()).unwrap();
        let (p_hat, _) = empirical_optimum(&stats, gamma).unwrap();
        let truth = build_empirical_lp(&stats, gamma);
        let l = (8.0f64 / beta).ln();
        let obj_tol = 12.0 * 2.0 * l / (m as f64 * eps);
        let mut rng = seeded_rng(11);
        let (mut feasible, mut close, draws) = (0, 0, 1000);
        for _ in 0..draws {
            let pstats = perturb_stats(&stats, eps, beta, m, &mut rng).unwrap();
            let noisy = build_private_lp(&pstats, gamma);
            if noisy.max_violation(&p_hat.p) <= 0.0 {
                feasible += 1;
            }
            let ok = (0..20).all(|_| {
                let p: Vec<f64> = (0..4).map(|_| rng.random()).collect();
                (noisy.value_at(&p) - truth.value_at(&p)).abs() <= obj_tol
            });
            close += usize::from(ok);
        }
        assert!(feasible as f64 / draws as f64 >= 1.0 - beta, "{feasible}");
        assert!(close as f64 / draws as f64 >= 1.0 - beta, "{close}");
    }

    #[test]
    fn report_row_format() {
        let data = synth(9, 800);
        let out = dp_postprocess(&data, &config(0.1, f64::INFINITY), &mut seeded_rng(0)).unwrap();
        let row = out.report.csv_row();
        assert!(row.starts_with("0.1,inf,0.05,"));
        assert!(row.ends_with(",ok"));
        assert_eq!(row.split(',').count(), PostprocessReport::CSV_HEADER.split(',').count());
        assert_eq!(out.ledger.entries(), &[(f64::INFINITY, 0.0)]);
    }
}
