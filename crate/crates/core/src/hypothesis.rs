//! Finite hypothesis classes, induced labellings and randomized classifiers.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};

use rand::Rng as _;
use rand::RngCore;
use thiserror::Error;

use crate::dataset::{Dataset, Record};

#[derive(Debug, Error)]
pub enum HypothesisError {
    #[error("group-based hypothesis {0} evaluated without access to the protected attribute")]
    GroupBlind(usize),
    #[error("feature index {feature} out of range for dimension {dim}")]
    FeatureOutOfRange { feature: usize, dim: usize },
    #[error("invalid hypothesis class: {0}")]
    InvalidClass(String),
    #[error("induced labellings require an A-blind class")]
    AwareLabellings,
    #[error("invalid randomized classifier: {0}")]
    InvalidMixture(String),
    #[error("unknown hypothesis id {0}")]
    UnknownId(usize),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, HypothesisError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    /// Predict 1 when the feature exceeds the threshold.
    Positive,
    /// Predict 1 when the feature is at most the threshold.
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HypothesisKind {
    Constant(u8),
    Stump {
        feature: usize,
        threshold: f64,
        polarity: Polarity,
    },
    /// `1{A = a}`
    GroupIndicator(usize),
    /// `1{A != a}`
    GroupComplement(usize),
}

impl HypothesisKind {
    pub fn uses_group(&self) -> bool {
        matches!(self, Self::GroupIndicator(_) | Self::GroupComplement(_))
    }
}

impl fmt::Display for HypothesisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(b) => write!(f, "const({b})"),
            Self::Stump {
                feature,
                threshold,
                polarity: Polarity::Positive,
            } => write!(f, "x{feature} > {threshold}"),
            Self::Stump {
                feature,
                threshold,
                polarity: Polarity::Negative,
            } => write!(f, "x{feature} <= {threshold}"),
            Self::GroupIndicator(a) => write!(f, "A == {a}"),
            Self::GroupComplement(a) => write!(f, "A != {a}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypothesis {
    pub id: usize,
    pub kind: HypothesisKind,
}

impl Hypothesis {
    /// Evaluates on features `x`; `group` is `None` when the protected
    /// attribute is not available.
    pub fn predict(&self, x: &[f64], group: Option<usize>) -> Result<u8> {
        match self.kind {
            HypothesisKind::Constant(b) => Ok(b),
            HypothesisKind::Stump {
                feature,
                threshold,
                polarity,
            } => {
                let v = *x.get(feature).ok_or(HypothesisError::FeatureOutOfRange {
                    feature,
                    dim: x.len(),
                })?;
                let above = v > threshold;
                Ok(u8::from(match polarity {
                    Polarity::Positive => above,
                    Polarity::Negative => !above,
                }))
            }
            HypothesisKind::GroupIndicator(a) => {
                group.map(|g| u8::from(g == a)).ok_or(HypothesisError::GroupBlind(self.id))
            }
            HypothesisKind::GroupComplement(a) => {
                group.map(|g| u8::from(g != a)).ok_or(HypothesisError::GroupBlind(self.id))
            }
        }
    }
}

/// Whether hypotheses may read the protected attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassMode {
    Blind,
    Aware,
}

/// A finite, ordered hypothesis class with dense ids.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisClass {
    members: Vec<Hypothesis>,
    mode: ClassMode,
}

impl HypothesisClass {
    pub fn new(kinds: Vec<HypothesisKind>, mode: ClassMode) -> Result<Self> {
        if kinds.len() < 2 {
            return Err(HypothesisError::InvalidClass(format!(
                "class needs at least two members, got {}",
                kinds.len()
            )));
        }
        if mode == ClassMode::Blind {
            if let Some(k) = kinds.iter().find(|k| k.uses_group()) {
                return Err(HypothesisError::InvalidClass(format!("{k} in an A-blind class")));
            }
        }
        let members = kinds
            .into_iter()
            .enumerate()
            .map(|(id, kind)| Hypothesis { id, kind })
            .collect();
        Ok(Self { members, mode })
    }

    pub fn members(&self) -> &[Hypothesis] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn mode(&self) -> ClassMode {
        self.mode
    }

    pub fn get(&self, id: usize) -> Result<&Hypothesis> {
        self.members.get(id).ok_or(HypothesisError::UnknownId(id))
    }

    pub fn predict(&self, id: usize, x: &[f64], group: usize) -> Result<u8> {
        let group = match self.mode {
            ClassMode::Aware => Some(group),
            ClassMode::Blind => None,
        };
        self.get(id)?.predict(x, group)
    }

    pub fn predict_record(&self, id: usize, record: &Record) -> Result<u8> {
        self.predict(id, &record.x, record.group)
    }

    /// Prediction vector of hypothesis `id` over every record.
    pub fn predictions(&self, id: usize, data: &Dataset) -> Result<Vec<u8>> {
        data.records().iter().map(|r| self.predict_record(id, r)).collect()
    }

    /// True when `h_a` and its complement are present for every group.
    pub fn has_discriminatory_classifiers(&self, num_groups: usize) -> bool {
        (0..num_groups).all(|a| {
            self.members.iter().any(|h| h.kind == HypothesisKind::GroupIndicator(a))
                && self.members.iter().any(|h| h.kind == HypothesisKind::GroupComplement(a))
        })
    }
}

/// Quantile stumps on every feature, both polarities, plus both constants.
///
/// Member order: `const(0)`, `const(1)`, then for each feature and each
/// distinct threshold the positive and negative stump. With `extension`
/// (A-aware only) `h_a` and its complement follow for every group.
pub fn build_stump_class(
    data: &Dataset,
    thresholds_per_feature: usize,
    mode: ClassMode,
    extension: bool,
) -> Result<HypothesisClass> {
    if thresholds_per_feature == 0 {
        return Err(HypothesisError::InvalidClass("thresholds_per_feature must be >= 1".into()));
    }
    if extension && mode == ClassMode::Blind {
        return Err(HypothesisError::InvalidClass(
            "group classifiers need an A-aware class".into(),
        ));
    }
    let mut kinds = vec![HypothesisKind::Constant(0), HypothesisKind::Constant(1)];
    let m = data.m();
    for feature in 0..data.dim() {
        let mut values: Vec<f64> = data.records().iter().map(|r| r.x[feature]).collect();
        values.sort_by(f64::total_cmp);
        let mut thresholds: Vec<f64> = (1..=thresholds_per_feature)
            .map(|j| {
                let level = j as f64 / (thresholds_per_feature + 1) as f64;
                values[(level * (m - 1) as f64).floor() as usize]
            })
            .collect();
        thresholds.dedup();
        for threshold in thresholds {
            for polarity in [Polarity::Positive, Polarity::Negative] {
                kinds.push(HypothesisKind::Stump {
                    feature,
                    threshold,
                    polarity,
                });
            }
        }
    }
    if extension {
        for a in 0..data.num_groups() {
            kinds.push(HypothesisKind::GroupIndicator(a));
            kinds.push(HypothesisKind::GroupComplement(a));
        }
    }
    HypothesisClass::new(kinds, mode)
}

/// Distinct labellings `H(S)` of an A-blind class on the sample, each with
/// its lowest-id representative.
#[derive(Debug, Clone, PartialEq)]
pub struct LabellingCache {
    rows: Vec<(usize, Vec<u8>)>,
}

impl LabellingCache {
    pub fn rows(&self) -> &[(usize, Vec<u8>)] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn induce_labellings(class: &HypothesisClass, data: &Dataset) -> Result<LabellingCache> {
    if class.mode() != ClassMode::Blind {
        return Err(HypothesisError::AwareLabellings);
    }
    let mut seen: HashMap<Vec<u8>, usize> = HashMap::new();
    let mut rows = Vec::new();
    for h in class.members() {
        let labels = class.predictions(h.id, data)?;
        if !seen.contains_key(&labels) {
            seen.insert(labels.clone(), h.id);
            rows.push((h.id, labels));
        }
    }
    Ok(LabellingCache { rows })
}

/// Candidate hypotheses with their prediction vectors on a fixed dataset,
/// in ascending id order.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    ids: Vec<usize>,
    predictions: Vec<Vec<u8>>,
}

impl CandidateSet {
    /// Every member of `class`.
    pub fn from_class(class: &HypothesisClass, data: &Dataset) -> Result<Self> {
        let mut ids = Vec::with_capacity(class.len());
        let mut predictions = Vec::with_capacity(class.len());
        for h in class.members() {
            ids.push(h.id);
            predictions.push(class.predictions(h.id, data)?);
        }
        Ok(Self { ids, predictions })
    }

    /// One representative per induced labelling.
    pub fn from_labellings(cache: &LabellingCache) -> Self {
        let (ids, predictions) = cache.rows().iter().cloned().unzip();
        Self { ids, predictions }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[u8])> {
        self.ids.iter().copied().zip(self.predictions.iter().map(Vec::as_slice))
    }

    /// Prediction vector of hypothesis `id`.
    pub fn predictions_of(&self, id: usize) -> Result<&[u8]> {
        self.ids
            .binary_search(&id)
            .map(|pos| self.predictions[pos].as_slice())
            .map_err(|_| HypothesisError::UnknownId(id))
    }

    /// Soft (expected) predictions of a point mass on `id`.
    pub fn soft_predictions_of(&self, id: usize) -> Result<Vec<f64>> {
        Ok(self.predictions_of(id)?.iter().map(|&p| p as f64).collect())
    }
}

/// A finitely supported distribution over hypothesis ids.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedClassifier {
    support: Vec<(usize, f64)>,
}

const WEIGHT_TOLERANCE: f64 = 1e-12;

impl RandomizedClassifier {
    pub fn new(support: Vec<(usize, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(HypothesisError::InvalidMixture("empty support".into()));
        }
        if let Some((id, w)) = support.iter().find(|(_, w)| !(*w >= 0.0) || !w.is_finite()) {
            return Err(HypothesisError::InvalidMixture(format!("weight {w} on hypothesis {id}")));
        }
        let total: f64 = support.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(HypothesisError::InvalidMixture(format!("weights sum to {total}")));
        }
        Ok(Self { support })
    }

    pub fn point_mass(id: usize) -> Self {
        Self {
            support: vec![(id, 1.0)],
        }
    }

    /// Weight `1/T` on each of the `T` listed ids, duplicates kept.
    pub fn uniform(ids: &[usize]) -> Result<Self> {
        if ids.is_empty() {
            return Err(HypothesisError::InvalidMixture("empty support".into()));
        }
        let w = 1.0 / ids.len() as f64;
        Self::new(ids.iter().map(|&id| (id, w)).collect())
    }

    pub fn support(&self) -> &[(usize, f64)] {
        &self.support
    }

    /// Duplicate ids combined, sorted by id.
    pub fn merged(&self) -> Self {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for &(id, w) in &self.support {
            *acc.entry(id).or_insert(0.0) += w;
        }
        Self {
            support: acc.into_iter().collect(),
        }
    }

    /// `alpha * self + (1 - alpha) * other`.
    pub fn mix(&self, other: &Self, alpha: f64) -> Result<Self> {
        let support = self
            .support
            .iter()
            .map(|&(id, w)| (id, alpha * w))
            .chain(other.support.iter().map(|&(id, w)| (id, (1.0 - alpha) * w)))
            .collect();
        Self::new(support)
    }

    pub fn validate_for(&self, class: &HypothesisClass) -> Result<()> {
        for &(id, _) in &self.support {
            class.get(id)?;
        }
        Ok(())
    }

    /// Draws one hypothesis and evaluates it (deployment semantics).
    pub fn mix_predict<R: RngCore + ?Sized>(
        &self,
        class: &HypothesisClass,
        x: &[f64],
        group: usize,
        rng: &mut R,
    ) -> Result<u8> {
        let mut ticket: f64 = rng.random();
        let mut chosen = self.support[self.support.len() - 1].0;
        for &(id, w) in &self.support {
            if ticket < w {
                chosen = id;
                break;
            }
            ticket -= w;
        }
        class.predict(chosen, x, group)
    }

    /// Per-record probability of predicting 1 (expectation semantics).
    pub fn soft_predictions(&self, class: &HypothesisClass, data: &Dataset) -> Result<Vec<f64>> {
        let mut out = vec![0.0; data.m()];
        for (id, w) in self.merged().support {
            for (o, r) in out.iter_mut().zip(data.records()) {
                *o += w * class.predict_record(id, r)? as f64;
            }
        }
        Ok(out)
    }

    /// As [`soft_predictions`](Self::soft_predictions) from a precomputed table.
    pub fn soft_predictions_with(&self, candidates: &CandidateSet) -> Result<Vec<f64>> {
        let merged = self.merged();
        let m = match merged.support.first() {
            Some(&(id, _)) => candidates.predictions_of(id)?.len(),
            None => 0,
        };
        let mut out = vec![0.0; m];
        for (id, w) in merged.support {
            for (o, &p) in out.iter_mut().zip(candidates.predictions_of(id)?) {
                *o += w * p as f64;
            }
        }
        Ok(out)
    }

    /// CSV with header `hypothesis_id,weight,description`, duplicates merged.
    pub fn write_csv<W: Write>(&self, class: &HypothesisClass, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["hypothesis_id", "weight", "description"])?;
        for (id, weight) in self.merged().support {
            let description = class.get(id)?.kind.to_string();
            w.write_record([id.to_string(), weight.to_string(), description])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut support = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let parse_err = || HypothesisError::InvalidMixture(format!("bad row {:?}", row));
            let id: usize = row.get(0).and_then(|s| s.trim().parse().ok()).ok_or_else(parse_err)?;
            let w: f64 = row.get(1).and_then(|s| s.trim().parse().ok()).ok_or_else(parse_err)?;
            support.push((id, w));
        }
        Self::new(support)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Record;
    use crate::seeded_rng;

    fn tiny() -> Dataset {
        let records = vec![
            Record::new(vec![0.1], 0, 0),
            Record::new(vec![0.4], 0, 1),
            Record::new(vec![0.6], 1, 0),
            Record::new(vec![0.9], 1, 1),
            Record::new(vec![0.3], 0, 0),
            Record::new(vec![0.8], 1, 1),
        ];
        Dataset::new(records, 2, 1).unwrap()
    }

    #[test]
    fn basic_predictions() {
        let c1 = Hypothesis {
            id: 0,
            kind: HypothesisKind::Constant(1),
        };
        assert_eq!(c1.predict(&[5.0], None).unwrap(), 1);
        let g1 = Hypothesis {
            id: 1,
            kind: HypothesisKind::GroupIndicator(1),
        };
        assert_eq!(g1.predict(&[], Some(1)).unwrap(), 1);
        assert_eq!(g1.predict(&[], Some(0)).unwrap(), 0);
        assert!(matches!(g1.predict(&[], None), Err(HypothesisError::GroupBlind(1))));
        let s = Hypothesis {
            id: 2,
            kind: HypothesisKind::Stump {
                feature: 0,
                threshold: 0.5,
                polarity: Polarity::Positive,
            },
        };
        assert_eq!(s.predict(&[0.7, 0.0], None).unwrap(), 1);
        assert_eq!(s.predict(&[0.3], None).unwrap(), 0);
    }

    #[test]
    fn stump_class_counts() {
        let data = tiny();
        let class = build_stump_class(&data, 1, ClassMode::Blind, false).unwrap();
        assert_eq!(class.len(), 4);
        let aware = build_stump_class(&data, 1, ClassMode::Aware, true).unwrap();
        assert_eq!(aware.len(), 8);
        assert!(aware.has_discriminatory_classifiers(2));
        let tail: Vec<_> = aware.members()[4..].iter().map(|h| h.kind).collect();
        assert_eq!(
            tail,
            vec![
                HypothesisKind::GroupIndicator(0),
                HypothesisKind::GroupComplement(0),
                HypothesisKind::GroupIndicator(1),
                HypothesisKind::GroupComplement(1),
            ]
        );
        assert_eq!(class, build_stump_class(&data, 1, ClassMode::Blind, false).unwrap());
        assert!(build_stump_class(&data, 1, ClassMode::Blind, true).is_err());
        assert!(build_stump_class(&data, 0, ClassMode::Blind, false).is_err());
    }

    #[test]
    fn blind_class_rejects_group_members() {
        let kinds = vec![HypothesisKind::Constant(0), HypothesisKind::GroupIndicator(0)];
        assert!(HypothesisClass::new(kinds, ClassMode::Blind).is_err());
    }

    #[test]
    fn labellings_dedup() {
        let data = tiny();
        let stump = |t| HypothesisKind::Stump {
            feature: 0,
            threshold: t,
            polarity: Polarity::Positive,
        };
        // 0.5 and 0.55 split the sample identically
        let class = HypothesisClass::new(
            vec![
                HypothesisKind::Constant(0),
                stump(0.5),
                stump(0.55),
                HypothesisKind::Constant(1),
            ],
            ClassMode::Blind,
        )
        .unwrap();
        let cache = induce_labellings(&class, &data).unwrap();
        assert_eq!(cache.len(), 3);
        let ids: Vec<usize> = cache.rows().iter().map(|r| r.0).collect();
        assert_eq!(ids, vec![0, 1, 3]);
        for (id, labels) in cache.rows() {
            assert_eq!(*labels, class.predictions(*id, &data).unwrap());
        }
        let aware = build_stump_class(&data, 2, ClassMode::Aware, true).unwrap();
        assert!(matches!(
            induce_labellings(&aware, &data),
            Err(HypothesisError::AwareLabellings)
        ));
    }

    #[test]
    fn mixture_validation() {
        assert!(RandomizedClassifier::new(vec![(0, 0.5), (1, 0.5)]).is_ok());
        assert!(RandomizedClassifier::new(vec![(0, 0.5), (1, 0.6)]).is_err());
        assert!(RandomizedClassifier::new(vec![(0, -0.5), (1, 1.5)]).is_err());
        assert!(RandomizedClassifier::new(vec![]).is_err());
        let q = RandomizedClassifier::uniform(&[3, 1, 3]).unwrap().merged();
        assert_eq!(q.support().len(), 2);
        assert_eq!(q.support()[0].0, 1);
        assert!((q.support()[1].1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn point_mass_matches_hypothesis() {
        let data = tiny();
        let class = build_stump_class(&data, 3, ClassMode::Blind, false).unwrap();
        let mut rng = seeded_rng(4);
        for h in class.members() {
            let q = RandomizedClassifier::point_mass(h.id);
            for r in data.records() {
                assert_eq!(
                    q.mix_predict(&class, &r.x, r.group, &mut rng).unwrap(),
                    class.predict_record(h.id, r).unwrap()
                );
            }
        }
    }

    #[test]
    fn half_constants_give_half_rate() {
        let data = tiny();
        let class = build_stump_class(&data, 1, ClassMode::Blind, false).unwrap();
        let q = RandomizedClassifier::new(vec![(0, 0.5), (1, 0.5)]).unwrap();
        let soft = q.soft_predictions(&class, &data).unwrap();
        assert!(soft.iter().all(|&p| p == 0.5));
        let table = CandidateSet::from_class(&class, &data).unwrap();
        assert_eq!(q.soft_predictions_with(&table).unwrap(), soft);
    }

    #[test]
    fn csv_round_trip_merges() {
        let data = tiny();
        let class = build_stump_class(&data, 1, ClassMode::Blind, false).unwrap();
        let q = RandomizedClassifier::uniform(&[2, 0, 2, 3]).unwrap();
        let mut buf = Vec::new();
        q.write_csv(&class, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("hypothesis_id,weight,description\n0,0.25,const(0)\n"));
        let back = RandomizedClassifier::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, q.merged());
    }
}
