//! Sensitivity of the optimal fair error to one record.
//!
//! `f(D)` is the smallest empirical error of a randomized classifier over a
//! finite class subject to false-positive parity within `γ`. A two-group
//! construction shows that for an A-blind class changing one record moves
//! `f` by `1/(4 + γm)`, while adding group indicators brings the change down
//! to `O(1/m)`.
//!
//! The neighbouring dataset differs from the original in one record's
//! feature value, not its group: the statement concerns `f` as a function
//! of the dataset.

use std::io::Write;

use thiserror::Error;

use crate::dataset::{DataError, Dataset, Record};
use crate::hypothesis::{CandidateSet, ClassMode, HypothesisClass, HypothesisError, HypothesisKind, Polarity, RandomizedClassifier};
use crate::lp::{self, LinearProgram, LpError, LpStatus};
use crate::metrics::{self, ConstraintMode, MetricsError};

#[derive(Debug, Error)]
pub enum SeparationError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("fair LP infeasible")]
    Infeasible,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Hypothesis(#[from] HypothesisError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SeparationError>;

/// Feature value `U`.
pub const U: f64 = 1.0;
/// Feature value `V`.
pub const V: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// `{h0, hU}`
    Blind,
    /// `{h0, hU, hR, hB}`
    Aware,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Self::Blind => "blind",
            Self::Aware => "aware",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationInstance {
    pub gamma: f64,
    pub m: usize,
    pub variant: Variant,
}

/// Sizes of the four cohorts `(R,V,0)`, `(B,U,1)`, `(B,V,0)`, `(B,U,0)`.
pub fn cohort_sizes(gamma: f64, m: usize) -> Result<[usize; 4]> {
    if m < 8 || m % 4 != 0 {
        return Err(SeparationError::InvalidInstance(format!("m = {m} must be a multiple of 4, at least 8")));
    }
    if !(gamma > 1.0 / m as f64 && gamma <= 1.0) {
        return Err(SeparationError::InvalidInstance(format!("gamma = {gamma} must lie in (1/m, 1]")));
    }
    let flipped = gamma * m as f64 / 4.0;
    let rounded = flipped.round();
    if (flipped - rounded).abs() > 1e-9 {
        return Err(SeparationError::InvalidInstance(format!(
            "gamma * m / 4 = {flipped} is not an integer"
        )));
    }
    let quarter = m / 4;
    let flipped = rounded as usize;
    Ok([m / 2, quarter, quarter - flipped, flipped])
}

/// The pair `(D, D')`: `D'` moves one `(B, V, 0)` record to `(B, U, 0)`.
pub fn build_instance(inst: &SeparationInstance) -> Result<(Dataset, Dataset)> {
    let [r_v0, b_u1, b_v0, b_u0] = cohort_sizes(inst.gamma, inst.m)?;
    let build = |b_v0: usize, b_u0: usize| {
        let mut records = Vec::with_capacity(inst.m);
        let cohorts = [(r_v0, 0, V, 0), (b_u1, 1, U, 1), (b_v0, 1, V, 0), (b_u0, 1, U, 0)];
        for (n, group, x, y) in cohorts {
            records.extend((0..n).map(|_| Record::new(vec![x], group, y)));
        }
        Dataset::with_names(records, 2, 1, vec!["R".into(), "B".into()])
    };
    Ok((build(b_v0, b_u0)?, build(b_v0 - 1, b_u0 + 1)?))
}

/// The hypothesis class of `variant`, in the order `h0, hU, hR, hB`.
pub fn separation_class(variant: Variant) -> Result<HypothesisClass> {
    let mut kinds = vec![
        HypothesisKind::Constant(0),
        HypothesisKind::Stump {
            feature: 0,
            threshold: (U + V) / 2.0,
            polarity: Polarity::Positive,
        },
    ];
    let mode = match variant {
        Variant::Blind => ClassMode::Blind,
        Variant::Aware => {
            kinds.push(HypothesisKind::GroupIndicator(0));
            kinds.push(HypothesisKind::GroupIndicator(1));
            ClassMode::Aware
        }
    };
    Ok(HypothesisClass::new(kinds, mode)?)
}

/// Optimal γ-fair randomized classifier over a finite candidate set.
#[derive(Debug, Clone)]
pub struct FairOptimum {
    pub value: f64,
    pub q: RandomizedClassifier,
}

/// Minimizes `err(Q)` over mixtures of the candidates subject to
/// `|ΔFP_a(Q)| <= γ` (and `|ΔTP_a(Q)| <= γ` in odds mode) for every `a != 0`.
pub fn solve_fair_lp(
    data: &Dataset,
    candidates: &CandidateSet,
    gamma: f64,
    mode: ConstraintMode,
) -> Result<FairOptimum> {
    let n = candidates.len();
    let mut objective = Vec::with_capacity(n);
    let mut rates = Vec::with_capacity(n);
    for (_, preds) in candidates.iter() {
        let soft = metrics::soft(preds);
        objective.push(metrics::error(&soft, data)?);
        rates.push(metrics::constrained_rates(&soft, data, mode)?);
    }
    let mut lp = LinearProgram::new(objective);
    lp.add_constraint(vec![1.0; n], 1.0);
    lp.add_constraint(vec![-1.0; n], -1.0);
    for a in 1..data.num_groups() {
        let fp = rates.iter().map(|r| r.fp[a] - r.fp[0]).collect();
        lp.add_abs_constraint(fp, gamma);
        if mode == ConstraintMode::Odds {
            let tp = rates.iter().map(|r| r.tp[a] - r.tp[0]).collect();
            lp.add_abs_constraint(tp, gamma);
        }
    }
    let sol = lp::solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(SeparationError::Infeasible);
    }
    let total: f64 = sol.p.iter().sum();
    let support: Vec<(usize, f64)> = candidates
        .ids()
        .iter()
        .zip(&sol.p)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&id, &w)| (id, w / total))
        .collect();
    Ok(FairOptimum {
        value: sol.value,
        q: RandomizedClassifier::new(support).map_err(SeparationError::Hypothesis)?,
    })
}

/// `f` on one dataset for one variant.
pub fn fair_error(data: &Dataset, variant: Variant, gamma: f64) -> Result<f64> {
    let class = separation_class(variant)?;
    let candidates = CandidateSet::from_class(&class, data)?;
    Ok(solve_fair_lp(data, &candidates, gamma, ConstraintMode::FprOnly)?.value)
}

/// Empirical bound on `m · |f(D) - f(D')|` for the aware class.
pub const AWARE_GAP_CONSTANT: f64 = 4.0;

/// `1/(4 + γm)`.
pub fn blind_gap(gamma: f64, m: usize) -> f64 {
    1.0 / (4.0 + gamma * m as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub gamma: f64,
    pub m: usize,
    pub variant: Variant,
    pub f_d: f64,
    pub f_dprime: f64,
    pub gap: f64,
}

/// `f(D)` and `f(D')` over a grid, both variants, skipping `(γ, m)` pairs
/// whose cohorts are not integral.
pub fn sensitivity_scan(gammas: &[f64], ms: &[usize]) -> Result<Vec<ScanRow>> {
    let mut rows = Vec::new();
    for &gamma in gammas {
        for &m in ms {
            if cohort_sizes(gamma, m).is_err() {
                continue;
            }
            for variant in [Variant::Blind, Variant::Aware] {
                let (d, d_prime) = build_instance(&SeparationInstance { gamma, m, variant })?;
                let f_d = fair_error(&d, variant, gamma)?;
                let f_dprime = fair_error(&d_prime, variant, gamma)?;
                rows.push(ScanRow {
                    gamma,
                    m,
                    variant,
                    f_d,
                    f_dprime,
                    gap: (f_d - f_dprime).abs(),
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_scan_csv<W: Write>(rows: &[ScanRow], mut out: W) -> Result<()> {
    writeln!(out, "gamma,m,variant,fD,fDprime,gap")?;
    for r in rows {
        writeln!(out, "{},{},{},{},{},{}", r.gamma, r.m, r.variant.name(), r.f_d, r.f_dprime, r.gap)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(data: &Dataset) -> [usize; 4] {
        let mut c = [0; 4];
        for r in data.records() {
            let idx = match (r.group, r.x[0] == U, r.label) {
                (0, false, 0) => 0,
                (1, true, 1) => 1,
                (1, false, 0) => 2,
                (1, true, 0) => 3,
                other => panic!("unexpected record {other:?}"),
            };
            c[idx] += 1;
        }
        c
    }

    #[test]
    fn cohorts_at_gamma_tenth() {
        let inst = SeparationInstance {
            gamma: 0.1,
            m: 40,
            variant: Variant::Blind,
        };
        let (d, d_prime) = build_instance(&inst).unwrap();
        assert_eq!(counts(&d), [20, 10, 9, 1]);
        assert_eq!(counts(&d_prime), [20, 10, 8, 2]);
        let differing: Vec<usize> = (0..40).filter(|&i| d.record(i) != d_prime.record(i)).collect();
        assert_eq!(differing.len(), 1);
        let i = differing[0];
        assert_eq!(d.record(i).group, d_prime.record(i).group);
        assert_eq!(build_instance(&inst).unwrap().0, d);
    }

    #[test]
    fn invalid_instances() {
        assert!(cohort_sizes(0.05, 40).is_err());
        assert!(cohort_sizes(0.1, 42).is_err());
        assert!(cohort_sizes(0.01, 40).is_err());
        assert!(cohort_sizes(0.1, 4).is_err());
    }

    #[test]
    fn blind_values_match_closed_form() {
        for (gamma, m) in [(0.1, 40), (0.2, 80), (0.05, 160), (0.1, 400)] {
            let (d, d_prime) = build_instance(&SeparationInstance {
                gamma,
                m,
                variant: Variant::Blind,
            })
            .unwrap();
            let f_d = fair_error(&d, Variant::Blind, gamma).unwrap();
            let f_dp = fair_error(&d_prime, Variant::Blind, gamma).unwrap();
            assert!((f_d - gamma / 4.0).abs() < 1e-9);
            assert!((f_dp - (gamma / 4.0 + blind_gap(gamma, m))).abs() < 1e-9);
        }
        assert_eq!(blind_gap(0.1, 40), 0.125);
    }

    #[test]
    fn h_u_error_is_quarter_gamma() {
        let (d, _) = build_instance(&SeparationInstance {
            gamma: 0.1,
            m: 40,
            variant: Variant::Blind,
        })
        .unwrap();
        let class = separation_class(Variant::Blind).unwrap();
        let preds = metrics::soft(&class.predictions(1, &d).unwrap());
        assert!((metrics::error(&preds, &d).unwrap() - 0.025).abs() < 1e-15);
    }

    /// Two hypotheses: scan the mixture weight directly.
    #[test]
    fn two_hypothesis_lp_matches_grid_search() {
        for (gamma, m) in [(0.1, 40), (0.2, 40), (0.05, 80)] {
            let (_, d_prime) = build_instance(&SeparationInstance {
                gamma,
                m,
                variant: Variant::Blind,
            })
            .unwrap();
            let class = separation_class(Variant::Blind).unwrap();
            let cands = CandidateSet::from_class(&class, &d_prime).unwrap();
            let lp_value = solve_fair_lp(&d_prime, &cands, gamma, ConstraintMode::FprOnly).unwrap().value;
            let h0 = metrics::soft(cands.predictions_of(0).unwrap());
            let hu = metrics::soft(cands.predictions_of(1).unwrap());
            let mut best = f64::INFINITY;
            for step in 0..=10_000 {
                let w = step as f64 / 10_000.0;
                let mix: Vec<f64> = h0.iter().zip(&hu).map(|(a, b)| (1.0 - w) * a + w * b).collect();
                let rates = metrics::constrained_rates(&mix, &d_prime, ConstraintMode::FprOnly).unwrap();
                if rates.max_delta_fp() <= gamma + 1e-12 {
                    best = best.min(metrics::error(&mix, &d_prime).unwrap());
                }
            }
            assert!((lp_value - best).abs() < 1e-3, "{lp_value} vs {best}");
        }
    }

    #[test]
    fn fair_error_monotone_in_gamma() {
        let (d, d_prime) = build_instance(&SeparationInstance {
            gamma: 0.1,
            m: 80,
            variant: Variant::Aware,
        })
        .unwrap();
        for data in [&d, &d_prime] {
            for variant in [Variant::Blind, Variant::Aware] {
                let mut prev = f64::INFINITY;
                for step in 0..=20 {
                    let f = fair_error(data, variant, step as f64 * 0.05).unwrap();
                    assert!(f <= prev + 1e-12);
                    prev = f;
                }
            }
        }
    }

    #[test]
    fn aware_gap_scales_as_one_over_m() {
        let rows = sensitivity_scan(&[0.05, 0.1, 0.2], &[40, 80, 160, 400]).unwrap();
        let mut scaled = Vec::new();
        for pair in rows.chunks(2) {
            let (blind, aware) = (&pair[0], &pair[1]);
            assert_eq!((blind.variant, aware.variant), (Variant::Blind, Variant::Aware));
            assert!((blind.gap - blind_gap(blind.gamma, blind.m)).abs() < 1e-9);
            assert!(aware.gap <= blind.gap + 1e-12);
            scaled.push(aware.gap * aware.m as f64);
        }
        // γ = 0.05, m = 40 has a fractional cohort
        assert_eq!(scaled.len(), 11);
        // gap * m approaches 3.8 from below as m grows, for every γ
        let worst = scaled.iter().copied().fold(0.0, f64::max);
        assert!(worst <= AWARE_GAP_CONSTANT, "aware gap * m reached {worst}");
        let mut csv = Vec::new();
        write_scan_csv(&rows, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("gamma,m,variant,fD,fDprime,gap\n0.05,80,blind,"));
    }
}
