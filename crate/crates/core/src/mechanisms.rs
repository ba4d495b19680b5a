//! Differential-privacy primitives.
//!
//! `epsilon = f64::INFINITY` is the non-private sentinel: Laplace noise
//! collapses to zero and the exponential mechanism returns the exact argmin
//! (lowest index on ties).

use rand::Rng as _;
use rand::RngCore;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MechanismError {
    #[error("invalid privacy parameter: {0}")]
    InvalidParameter(String),
    #[error("exponential mechanism needs at least one candidate")]
    EmptyCandidates,
    #[error("advanced composition needs identical entries, found ({0}, {1}) and ({2}, {3})")]
    Heterogeneous(f64, f64, f64, f64),
}

pub type Result<T> = std::result::Result<T, MechanismError>;

/// `(epsilon, delta)` together with the confidence parameter `beta` used by
/// the accuracy bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
    pub beta: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64, beta: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(MechanismError::InvalidParameter(format!("epsilon = {epsilon} must be > 0")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(MechanismError::InvalidParameter(format!("delta = {delta} outside [0, 1)")));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(MechanismError::InvalidParameter(format!("beta = {beta} outside (0, 1)")));
        }
        Ok(Self { epsilon, delta, beta })
    }

    pub fn is_private(&self) -> bool {
        self.epsilon.is_finite()
    }
}

/// One draw from `Laplace(0, scale)` by inverse CDF. A zero scale returns
/// exactly 0 without consuming randomness.
pub fn laplace_sample<R: RngCore + ?Sized>(rng: &mut R, scale: f64) -> Result<f64> {
    if !(scale >= 0.0) || scale.is_infinite() {
        return Err(MechanismError::InvalidParameter(format!("Laplace scale {scale}")));
    }
    if scale == 0.0 {
        return Ok(0.0);
    }
    // u in (0, 1); u = 0 would map to -inf
    let u = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    let centered = u - 0.5;
    let magnitude = -(1.0 - 2.0 * centered.abs()).ln();
    Ok(scale * centered.signum() * magnitude)
}

/// Laplace noise over `count` coordinates at a common scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub scale: f64,
    pub count: usize,
}

impl NoiseSpec {
    pub fn new(scale: f64, count: usize) -> Result<Self> {
        if !(scale >= 0.0) {
            return Err(MechanismError::InvalidParameter(format!("Laplace scale {scale}")));
        }
        Ok(Self { scale, count })
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        (0..self.count).map(|_| laplace_sample(rng, self.scale)).collect()
    }

    /// Sup-norm bound holding with probability at least `1 - beta`.
    pub fn tail_bound(&self, beta: f64) -> f64 {
        laplace_tail_bound(self.count, self.scale, beta)
    }
}

/// `ln(k / beta) * scale`: with probability at least `1 - beta`, none of `k`
/// i.i.d. `Laplace(scale)` draws exceeds this in magnitude.
pub fn laplace_tail_bound(k: usize, scale: f64, beta: f64) -> f64 {
    (k as f64 / beta).ln() * scale
}

/// Samples a candidate with probability proportional to
/// `exp(-epsilon * loss / (2 * sensitivity))`.
///
/// Losses are passed raw. With `epsilon = inf` the exact argmin is returned
/// (first candidate among ties).
pub fn exponential_mechanism<T: Copy, R: RngCore + ?Sized>(
    rng: &mut R,
    candidates: &[(T, f64)],
    sensitivity: f64,
    epsilon: f64,
) -> Result<T> {
    if candidates.is_empty() {
        return Err(MechanismError::EmptyCandidates);
    }
    if !(epsilon > 0.0) {
        return Err(MechanismError::InvalidParameter(format!("epsilon = {epsilon} must be > 0")));
    }
    if let Some((_, loss)) = candidates.iter().find(|(_, l)| !l.is_finite()) {
        return Err(MechanismError::InvalidParameter(format!("non-finite loss {loss}")));
    }
    let mut best = 0;
    for (i, (_, loss)) in candidates.iter().enumerate() {
        if *loss < candidates[best].1 {
            best = i;
        }
    }
    if epsilon.is_infinite() {
        return Ok(candidates[best].0);
    }
    if !(sensitivity > 0.0 && sensitivity.is_finite()) {
        return Err(MechanismError::InvalidParameter(format!("sensitivity {sensitivity}")));
    }
    let min_loss = candidates[best].1;
    let rate = epsilon / (2.0 * sensitivity);
    let weights: Vec<f64> = candidates
        .iter()
        .map(|(_, loss)| (-rate * (loss - min_loss)).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut ticket = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if ticket < *w {
            return Ok(candidates[i].0);
        }
        ticket -= w;
    }
    // rounding can leave a sliver past the last bucket
    Ok(candidates[weights.iter().rposition(|w| *w > 0.0).unwrap_or(best)].0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompositionMode {
    Basic,
    Advanced,
}

/// Record of every private release made by one algorithm invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetLedger {
    entries: Vec<(f64, f64)>,
    mode: CompositionMode,
}

impl BudgetLedger {
    pub fn new(mode: CompositionMode) -> Self {
        Self {
            entries: Vec::new(),
            mode,
        }
    }

    pub fn mode(&self) -> CompositionMode {
        self.mode
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn record(&mut self, epsilon: f64, delta: f64) -> Result<()> {
        if !(epsilon > 0.0) || !(0.0..1.0).contains(&delta) {
            return Err(MechanismError::InvalidParameter(format!(
                "ledger entry ({epsilon}, {delta})"
            )));
        }
        self.entries.push((epsilon, delta));
        Ok(())
    }

    /// Total `(epsilon, delta)`.
    ///
    /// Basic mode sums the entries. Advanced mode needs `T` identical
    /// entries `(e, d)` and returns `(2 e sqrt(2 T ln(1/target_delta)),
    /// T d + target_delta)`.
    pub fn compose(&self, target_delta: f64) -> Result<(f64, f64)> {
        match self.mode {
            CompositionMode::Basic => Ok(self
                .entries
                .iter()
                .fold((0.0, 0.0), |(e, d), (ei, di)| (e + ei, d + di))),
            CompositionMode::Advanced => {
                if !(target_delta > 0.0 && target_delta < 1.0) {
                    return Err(MechanismError::InvalidParameter(format!(
                        "advanced composition needs target delta in (0, 1), got {target_delta}"
                    )));
                }
                let Some(&(eps, delta)) = self.entries.first() else {
                    return Ok((0.0, target_delta));
                };
                if let Some(&(e2, d2)) = self.entries.iter().find(|&&(e, d)| e != eps || d != delta) {
                    return Err(MechanismError::Heterogeneous(eps, delta, e2, d2));
                }
                let t = self.entries.len() as f64;
                Ok((
                    2.0 * eps * (2.0 * t * (1.0 / target_delta).ln()).sqrt(),
                    t * delta + target_delta,
                ))
            }
        }
    }
}
