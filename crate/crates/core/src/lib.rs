//! Differentially private fair classification.
//!
//! Two learners for binary classifiers that satisfy approximate equalized
//! odds while keeping the protected attribute differentially private:
//!
//! * [`postprocess`] perturbs the joint statistics of a base classifier with
//!   Laplace noise and solves a linear program for group-dependent mixing
//!   probabilities.
//! * [`inprocess`] plays a Learner/Auditor zero-sum game where the Learner
//!   answers with the exponential mechanism and the Auditor runs noised
//!   exponentiated gradient on the fairness violations.
//!
//! Both accept `f64::INFINITY` as the privacy parameter, which routes every
//! mechanism to its noiseless limit and yields the non-private baselines.
//!
//! Supporting modules: [`dataset`] (records, CSV, synthetic data, joint
//! statistics), [`mechanisms`] (Laplace, exponential mechanism, composition),
//! [`hypothesis`] (finite classes and randomized classifiers), [`metrics`]
//! (error, rates, violation vectors, Lagrangian), [`lp`] (dense simplex),
//! [`separation`] (A-blind vs A-aware sensitivity of the optimal fair error),
//! and [`sweep`] (Pareto sweeps over fairness and privacy grids).

pub mod dataset;
pub mod hypothesis;
pub mod inprocess;
pub mod lp;
pub mod mechanisms;
pub mod metrics;
pub mod postprocess;
pub mod separation;
pub mod sweep;

pub use dataset::{CsvSchema, Dataset, JointStats, Record};
pub use hypothesis::{Hypothesis, HypothesisClass, HypothesisKind, RandomizedClassifier};
pub use mechanisms::{BudgetLedger, PrivacyParams};
pub use metrics::{ConstraintMode, DualVector, ViolationVector};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used by every top-level algorithm invocation.
pub type Rng = ChaCha8Rng;

/// Seeded generator for one algorithm invocation.
pub fn seeded_rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
