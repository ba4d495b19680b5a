//! Error, group-conditional rates, fairness violations and the Lagrangian.
//!
//! Predictions are passed as soft predictions: entry `i` is the probability
//! that the (possibly randomized) classifier outputs 1 on record `i`. Hard
//! predictions convert with [`soft`]. Every metric is linear in these values
//! and therefore in the weights of a randomized classifier.

use thiserror::Error;

use crate::dataset::Dataset;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("expected {expected} predictions, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("rate undefined: no records with group {group} and label {label}")]
    DegenerateCell { group: usize, label: u8 },
    #[error("dual vector has length {actual}, violation vector has length {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("invalid dual vector: {0}")]
    InvalidDual(String),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

pub fn soft(predictions: &[u8]) -> Vec<f64> {
    predictions.iter().map(|&p| p as f64).collect()
}

fn check_len(data: &Dataset, predictions: &[f64]) -> Result<()> {
    if predictions.len() != data.m() {
        return Err(MetricsError::LengthMismatch {
            expected: data.m(),
            actual: predictions.len(),
        });
    }
    Ok(())
}

/// Fraction of records misclassified, `P̂[Ŷ != Y]`.
pub fn error(predictions: &[f64], data: &Dataset) -> Result<f64> {
    check_len(data, predictions)?;
    if data.m() == 0 {
        return Ok(0.0);
    }
    let wrong: f64 = predictions
        .iter()
        .zip(data.records())
        .map(|(&p, r)| if r.label == 1 { 1.0 - p } else { p })
        .sum();
    Ok(wrong / data.m() as f64)
}

/// Per-group false and true positive rates.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupRates {
    pub fp: Vec<f64>,
    pub tp: Vec<f64>,
    /// Cells `(a, y)` with no records; their rate was set to 0.
    pub undefined: Vec<(usize, u8)>,
}

impl GroupRates {
    /// Rates from per-cell record counts and positive mass, both indexed
    /// `2a + y`.
    pub fn from_cells(counts: &[usize], positives: &[f64], strict: bool) -> Result<Self> {
        let num_groups = counts.len() / 2;
        let mut fp = vec![0.0; num_groups];
        let mut tp = vec![0.0; num_groups];
        let mut undefined = Vec::new();
        for a in 0..num_groups {
            for y in 0..2u8 {
                let idx = 2 * a + y as usize;
                let rate = if counts[idx] == 0 {
                    if strict {
                        return Err(MetricsError::DegenerateCell { group: a, label: y });
                    }
                    undefined.push((a, y));
                    0.0
                } else {
                    positives[idx] / counts[idx] as f64
                };
                if y == 0 {
                    fp[a] = rate;
                } else {
                    tp[a] = rate;
                }
            }
        }
        Ok(Self { fp, tp, undefined })
    }

    pub fn num_groups(&self) -> usize {
        self.fp.len()
    }

    /// `max_a |FP_a - FP_0|`.
    pub fn max_delta_fp(&self) -> f64 {
        self.fp.iter().map(|f| (f - self.fp[0]).abs()).fold(0.0, f64::max)
    }

    /// `max_a |TP_a - TP_0|`.
    pub fn max_delta_tp(&self) -> f64 {
        self.tp.iter().map(|t| (t - self.tp[0]).abs()).fold(0.0, f64::max)
    }
}

/// Positive mass per cell `2a + y`.
pub fn cell_positives(predictions: &[f64], data: &Dataset) -> Result<Vec<f64>> {
    check_len(data, predictions)?;
    let mut positives = vec![0.0; 2 * data.num_groups()];
    for (&p, r) in predictions.iter().zip(data.records()) {
        positives[2 * r.group + r.label as usize] += p;
    }
    Ok(positives)
}

/// Group-conditional rates. In strict mode an empty cell is an error; in
/// permissive mode its rate is 0 and the cell is listed in `undefined`.
pub fn group_rates(predictions: &[f64], data: &Dataset, strict: bool) -> Result<GroupRates> {
    let positives = cell_positives(predictions, data)?;
    GroupRates::from_cells(&data.cell_counts(), &positives, strict)
}

/// Which parity constraints are in force.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConstraintMode {
    /// False and true positive parity (equalized odds).
    #[default]
    Odds,
    /// False positive parity only.
    FprOnly,
}

impl ConstraintMode {
    /// Number of violation coordinates for `num_groups` groups.
    pub fn dimension(self, num_groups: usize) -> usize {
        let per_group = match self {
            Self::Odds => 4,
            Self::FprOnly => 2,
        };
        per_group * num_groups.saturating_sub(1)
    }
}

/// Signed slack of every parity constraint relative to group 0.
///
/// Coordinates per group `a = 1..|A|-1`, in order `(a,0,+)`, `(a,0,-)`,
/// then `(a,1,+)`, `(a,1,-)` unless in FPR-only mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationVector {
    pub r: Vec<f64>,
    pub gamma: f64,
    pub mode: ConstraintMode,
}

impl ViolationVector {
    pub fn from_rates(rates: &GroupRates, gamma: f64, mode: ConstraintMode) -> Self {
        let mut r = Vec::with_capacity(mode.dimension(rates.num_groups()));
        for a in 1..rates.num_groups() {
            let dfp = rates.fp[a] - rates.fp[0];
            r.push(dfp - gamma);
            r.push(-dfp - gamma);
            if mode == ConstraintMode::Odds {
                let dtp = rates.tp[a] - rates.tp[0];
                r.push(dtp - gamma);
                r.push(-dtp - gamma);
            }
        }
        Self { r, gamma, mode }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Largest coordinate; `-inf` for a single group.
    pub fn max(&self) -> f64 {
        self.r.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// γ-fair iff no coordinate is positive.
    pub fn is_fair(&self) -> bool {
        self.r.iter().all(|&v| v <= 0.0)
    }

    /// Index of the coordinate `(group, label, sign)`.
    pub fn coordinate(mode: ConstraintMode, group: usize, label: u8, positive: bool) -> usize {
        let per_group = mode.dimension(2);
        (group - 1) * per_group + 2 * label as usize + usize::from(!positive)
    }
}

pub fn violation_vector(
    predictions: &[f64],
    data: &Dataset,
    gamma: f64,
    mode: ConstraintMode,
) -> Result<ViolationVector> {
    let rates = constrained_rates(predictions, data, mode)?;
    Ok(ViolationVector::from_rates(&rates, gamma, mode))
}

/// Group rates where only the cells constrained under `mode` must be
/// occupied; FPR-only mode tolerates empty label-1 cells.
pub fn constrained_rates(predictions: &[f64], data: &Dataset, mode: ConstraintMode) -> Result<GroupRates> {
    let rates = group_rates(predictions, data, false)?;
    let required = |y: u8| y == 0 || mode == ConstraintMode::Odds;
    if let Some(&(group, label)) = rates.undefined.iter().find(|(_, y)| required(*y)) {
        return Err(MetricsError::DegenerateCell { group, label });
    }
    Ok(rates)
}

/// Dual weights on the violation coordinates, parameterized by log-weights
/// with an implicit slack slot so that `‖λ‖₁ < B`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector {
    pub lambda: Vec<f64>,
    pub theta: Vec<f64>,
    pub bound: f64,
}

impl DualVector {
    pub fn zeros(len: usize, bound: f64) -> Self {
        Self {
            lambda: vec![0.0; len],
            theta: vec![0.0; len],
            bound,
        }
    }

    /// `λ_k = B e^{θ_k} / (1 + Σ e^{θ_k'})`, computed with a shifted softmax.
    pub fn from_theta(theta: Vec<f64>, bound: f64) -> Self {
        let shift = theta.iter().copied().fold(0.0, f64::max);
        let exps: Vec<f64> = theta.iter().map(|t| (t - shift).exp()).collect();
        let denom = (-shift).exp() + exps.iter().sum::<f64>();
        let lambda = exps.iter().map(|e| bound * e / denom).collect();
        Self {
            lambda,
            theta,
            bound,
        }
    }

    /// Explicit weights; `theta` is left empty.
    pub fn from_lambda(lambda: Vec<f64>, bound: f64) -> Result<Self> {
        if lambda.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(MetricsError::InvalidDual("negative or non-finite weight".into()));
        }
        let norm: f64 = lambda.iter().sum();
        if norm > bound * (1.0 + 1e-12) {
            return Err(MetricsError::InvalidDual(format!("‖λ‖₁ = {norm} exceeds B = {bound}")));
        }
        Ok(Self {
            lambda,
            theta: Vec::new(),
            bound,
        })
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn l1(&self) -> f64 {
        self.lambda.iter().sum()
    }

    /// `λ·r`.
    pub fn dot(&self, r: &ViolationVector) -> Result<f64> {
        if r.len() != self.len() {
            return Err(MetricsError::DimensionMismatch {
                expected: r.len(),
                actual: self.len(),
            });
        }
        Ok(self.lambda.iter().zip(&r.r).map(|(l, v)| l * v).sum())
    }
}

/// `L(Q, λ) = err(Q) + λ·r̂(Q)`.
pub fn lagrangian(
    predictions: &[f64],
    dual: &DualVector,
    data: &Dataset,
    gamma: f64,
    mode: ConstraintMode,
) -> Result<f64> {
    let expected = mode.dimension(data.num_groups());
    if dual.len() != expected {
        return Err(MetricsError::DimensionMismatch {
            expected,
            actual: dual.len(),
        });
    }
    let r = violation_vector(predictions, data, gamma, mode)?;
    Ok(error(predictions, data)? + dual.dot(&r)?)
}
