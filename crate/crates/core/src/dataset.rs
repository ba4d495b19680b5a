//! Labeled records with a protected group attribute.
//!
//! Groups are always re-indexed to `0..num_groups` with the anchor group at
//! index 0. Unless an anchor is named explicitly, the anchor is the most
//! frequent group (ties go to the lexicographically lowest original value)
//! and the remaining groups follow in ascending order of their original
//! values.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng as _;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("malformed row at line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("label not binary at line {line}")]
    LabelNotBinary { line: u64 },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("strict validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// One individual: unprotected features, protected group, binary label.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub x: Vec<f64>,
    pub group: usize,
    pub label: u8,
}

impl Record {
    pub fn new(x: Vec<f64>, group: usize, label: u8) -> Self {
        Self { x, group, label }
    }
}

/// An immutable collection of records over `num_groups` protected groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<Record>,
    num_groups: usize,
    dim: usize,
    group_names: Vec<String>,
    feature_names: Vec<String>,
}

/// Outcome of validating group and cell coverage.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub missing_groups: Vec<usize>,
    /// `(group, label)` cells with no records.
    pub degenerate_cells: Vec<(usize, u8)>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.missing_groups.is_empty() && self.degenerate_cells.is_empty()
    }

    pub fn describe(&self) -> String {
        let mut parts: Vec<String> = self
            .missing_groups
            .iter()
            .map(|a| format!("missing group {a}"))
            .collect();
        parts.extend(
            self.degenerate_cells
                .iter()
                .map(|(a, y)| format!("degenerate cell ({a},{y})")),
        );
        parts.join("; ")
    }
}

impl Dataset {
    /// Builds a dataset, checking the record invariants. Group names default
    /// to the decimal group index.
    pub fn new(records: Vec<Record>, num_groups: usize, dim: usize) -> Result<Self> {
        let group_names = (0..num_groups).map(|a| a.to_string()).collect();
        Self::with_names(records, num_groups, dim, group_names)
    }

    pub fn with_names(
        records: Vec<Record>,
        num_groups: usize,
        dim: usize,
        group_names: Vec<String>,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(DataError::Invalid("dataset has no records".into()));
        }
        if num_groups == 0 {
            return Err(DataError::Invalid("at least one group is required".into()));
        }
        if group_names.len() != num_groups {
            return Err(DataError::Invalid(format!(
                "{} group names for {num_groups} groups",
                group_names.len()
            )));
        }
        for (i, r) in records.iter().enumerate() {
            if r.group >= num_groups {
                return Err(DataError::Invalid(format!(
                    "record {i}: group {} out of range 0..{num_groups}",
                    r.group
                )));
            }
            if r.label > 1 {
                return Err(DataError::Invalid(format!("record {i}: label {} not binary", r.label)));
            }
            if r.x.len() != dim {
                return Err(DataError::Invalid(format!(
                    "record {i}: {} features, expected {dim}",
                    r.x.len()
                )));
            }
        }
        let feature_names = (0..dim).map(|j| format!("x{j}")).collect();
        Ok(Self {
            records,
            num_groups,
            dim,
            group_names,
            feature_names,
        })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn record(&self, i: usize) -> &Record {
        &self.records[i]
    }

    pub fn m(&self) -> usize {
        self.records.len()
    }

    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn group_names(&self) -> &[String] {
        &self.group_names
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn labels(&self) -> impl Iterator<Item = u8> + '_ {
        self.records.iter().map(|r| r.label)
    }

    /// Record counts per `(group, label)` cell, indexed `2 * group + label`.
    pub fn cell_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; 2 * self.num_groups];
        for r in &self.records {
            counts[2 * r.group + r.label as usize] += 1;
        }
        counts
    }

    /// Empirical `P[A = a, Y = y]`, indexed `2 * a + y`.
    pub fn cell_fractions(&self) -> Vec<f64> {
        let m = self.m() as f64;
        self.cell_counts().into_iter().map(|c| c as f64 / m).collect()
    }

    /// Smallest `P[A = a, Y = y]` over all cells.
    pub fn min_cell_fraction(&self) -> f64 {
        self.cell_fractions().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn group_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_groups];
        for r in &self.records {
            counts[r.group] += 1;
        }
        counts
    }

    pub fn validate(&self) -> ValidationReport {
        let groups = self.group_counts();
        let cells = self.cell_counts();
        let mut report = ValidationReport::default();
        for a in 0..self.num_groups {
            if groups[a] == 0 {
                report.missing_groups.push(a);
            }
            for y in 0..2u8 {
                if cells[2 * a + y as usize] == 0 {
                    report.degenerate_cells.push((a, y));
                }
            }
        }
        report
    }

    /// Strict mode: every group present with both labels.
    pub fn validate_strict(&self) -> Result<()> {
        let report = self.validate();
        if report.is_clean() {
            Ok(())
        } else {
            Err(DataError::Validation(report.describe()))
        }
    }

    /// Re-indexes groups so the most frequent group becomes the anchor.
    pub fn reindexed_most_frequent_first(self) -> Self {
        let counts = self.group_counts();
        let names = self.group_names.clone();
        let anchor = (0..self.num_groups)
            .max_by(|&a, &b| counts[a].cmp(&counts[b]).then_with(|| names[b].cmp(&names[a])))
            .unwrap_or(0);
        self.reindexed_with_anchor(anchor)
    }

    /// Moves `anchor` to index 0; the other groups follow in ascending order
    /// of their names.
    pub fn reindexed_with_anchor(self, anchor: usize) -> Self {
        let mut rest: Vec<usize> = (0..self.num_groups).filter(|&a| a != anchor).collect();
        rest.sort_by(|&a, &b| self.group_names[a].cmp(&self.group_names[b]));
        let order: Vec<usize> = std::iter::once(anchor).chain(rest).collect();
        let mut new_index = vec![0usize; self.num_groups];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }
        let group_names = order.iter().map(|&old| self.group_names[old].clone()).collect();
        let records = self
            .records
            .into_iter()
            .map(|mut r| {
                r.group = new_index[r.group];
                r
            })
            .collect();
        Self {
            records,
            group_names,
            ..self
        }
    }

    /// `k` concatenated copies of the records.
    pub fn replicated(&self, k: usize) -> Self {
        let k = k.max(1);
        let mut records = Vec::with_capacity(self.m() * k);
        for _ in 0..k {
            records.extend(self.records.iter().cloned());
        }
        Self {
            records,
            ..self.clone()
        }
    }

    /// Neighboring dataset that differs only in record `i`'s group.
    pub fn with_group_changed(&self, i: usize, group: usize) -> Self {
        let mut out = self.clone();
        out.records[i].group = group;
        out
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push("group");
        header.push("label");
        w.write_record(&header)?;
        for r in &self.records {
            let mut row: Vec<String> = r.x.iter().map(|v| v.to_string()).collect();
            row.push(self.group_names[r.group].clone());
            row.push(r.label.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_csv_writer(File::create(path)?)
    }
}

/// Column layout of a dataset CSV. Every column other than the group and
/// label columns is a real-valued feature, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub group_column: String,
    pub label_column: String,
    /// Original group value to use as the anchor instead of the most
    /// frequent group.
    pub anchor: Option<String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            group_column: "group".into(),
            label_column: "label".into(),
            anchor: None,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    read_csv(File::open(path)?, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let find = |name: &str| header.iter().position(|h| h.trim() == name);
    let group_col = find(&schema.group_column)
        .ok_or_else(|| DataError::Schema(format!("missing group column '{}'", schema.group_column)))?;
    let label_col = find(&schema.label_column)
        .ok_or_else(|| DataError::Schema(format!("missing label column '{}'", schema.label_column)))?;
    if group_col == label_col {
        return Err(DataError::Schema("group and label columns coincide".into()));
    }
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&c| c != group_col && c != label_col)
        .collect();
    let feature_names: Vec<String> = feature_cols.iter().map(|&c| header[c].trim().to_string()).collect();

    let mut raw: Vec<(Vec<f64>, String, u8)> = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| match e.position() {
            Some(pos) => DataError::Malformed {
                line: pos.line(),
                message: e.to_string(),
            },
            None => DataError::Csv(e),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != header.len() {
            return Err(DataError::Malformed {
                line,
                message: format!("{} fields, header has {}", row.len(), header.len()),
            });
        }
        let x = feature_cols
            .iter()
            .map(|&c| {
                let field = row[c].trim();
                field.parse::<f64>().map_err(|_| DataError::Malformed {
                    line,
                    message: format!("feature '{}' is not a number: '{field}'", header[c].trim()),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let label = match row[label_col].trim() {
            "0" => 0,
            "1" => 1,
            _ => return Err(DataError::LabelNotBinary { line }),
        };
        let group = row[group_col].trim();
        if group.is_empty() {
            return Err(DataError::Malformed {
                line,
                message: "empty group value".into(),
            });
        }
        raw.push((x, group.to_string(), label));
    }
    if raw.is_empty() {
        return Err(DataError::Invalid("CSV has no data rows".into()));
    }

    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (_, g, _) in &raw {
        let next = index.len();
        index.entry(g.clone()).or_insert(next);
    }
    let mut names = vec![String::new(); index.len()];
    for (name, &i) in &index {
        names[i] = name.clone();
    }
    let dim = feature_cols.len();
    let records = raw
        .into_iter()
        .map(|(x, g, y)| Record::new(x, index[&g], y))
        .collect();
    let mut data = Dataset::with_names(records, names.len(), dim, names)?;
    data.feature_names = feature_names;
    Ok(match &schema.anchor {
        Some(name) => {
            let anchor = *index
                .get(name)
                .ok_or_else(|| DataError::Schema(format!("anchor group '{name}' not present")))?;
            data.reindexed_with_anchor(anchor)
        }
        None => data.reindexed_most_frequent_first(),
    })
}

/// Parameters of the synthetic generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub m: usize,
    pub num_groups: usize,
    pub dim: usize,
    /// Strength of the group-dependent shift in features and labels, in `[0, 1]`.
    pub bias: f64,
}

/// Draws a planted-bias dataset.
///
/// Group `a` has sampling weight proportional to `num_groups - a` and a
/// signed offset `s_a` spread evenly over `[-1, 1]`. Features are Gaussian
/// with mean `2 * bias * s_a * w` around the label direction `w`, and the
/// label is `1{w.x + bias * s_a + noise > 0}`. With `bias = 0` every group
/// shares one conditional distribution.
pub fn synth_generate(config: &SynthConfig) -> Result<Dataset> {
    let SynthConfig {
        seed,
        m,
        num_groups,
        dim,
        bias,
    } = *config;
    if num_groups == 0 || dim == 0 {
        return Err(DataError::Invalid("num_groups and dim must be positive".into()));
    }
    if m < 2 * num_groups {
        return Err(DataError::Invalid(format!("m = {m} below 2 * num_groups")));
    }
    if !(0.0..=1.0).contains(&bias) {
        return Err(DataError::Invalid(format!("bias {bias} outside [0, 1]")));
    }
    let mut rng = crate::seeded_rng(seed);
    let norm = (1..=dim).map(|j| 1.0 / (j * j) as f64).sum::<f64>().sqrt();
    let direction: Vec<f64> = (1..=dim).map(|j| 1.0 / (j as f64 * norm)).collect();
    let offsets: Vec<f64> = (0..num_groups)
        .map(|a| {
            if num_groups == 1 {
                0.0
            } else {
                2.0 * a as f64 / (num_groups - 1) as f64 - 1.0
            }
        })
        .collect();
    let total_weight: usize = (1..=num_groups).sum();

    let mut records = Vec::with_capacity(m);
    for i in 0..m {
        // the first records cover every group once
        let group = if i < num_groups {
            i
        } else {
            let mut ticket = rng.random_range(0..total_weight);
            let mut a = 0;
            while ticket >= num_groups - a {
                ticket -= num_groups - a;
                a += 1;
            }
            a
        };
        let shift = bias * offsets[group];
        let x: Vec<f64> = direction
            .iter()
            .map(|w| 2.0 * shift * w + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let score: f64 = x.iter().zip(&direction).map(|(v, w)| v * w).sum();
        let noise: f64 = 0.5 * rng.sample::<f64, _>(StandardNormal);
        let label = u8::from(score + shift + noise > 0.0);
        records.push(Record::new(x, group, label));
    }
    Ok(Dataset::new(records, num_groups, dim)?.reindexed_most_frequent_first())
}

/// Empirical joint distribution of (prediction, group, label).
#[derive(Debug, Clone, PartialEq)]
pub struct JointStats {
    num_groups: usize,
    /// `P[Yhat = yhat, A = a, Y = y]` at index `(yhat * num_groups + a) * 2 + y`.
    q3: Vec<f64>,
    /// `P[A = a, Y = y]` at index `2 * a + y`.
    q2: Vec<f64>,
    min_q: f64,
}

impl JointStats {
    /// Builds stats from a raw `q3` table (which may hold any reals).
    pub fn from_table(num_groups: usize, q3: Vec<f64>) -> Self {
        assert_eq!(q3.len(), 4 * num_groups, "q3 table has wrong length");
        let mut q2 = vec![0.0; 2 * num_groups];
        for a in 0..num_groups {
            for y in 0..2 {
                q2[2 * a + y] = q3[a * 2 + y] + q3[(num_groups + a) * 2 + y];
            }
        }
        let min_q = q2.iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            num_groups,
            q3,
            q2,
            min_q,
        }
    }

    #[inline]
    pub fn index(num_groups: usize, yhat: u8, a: usize, y: u8) -> usize {
        (yhat as usize * num_groups + a) * 2 + y as usize
    }

    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    pub fn q(&self, yhat: u8, a: usize, y: u8) -> f64 {
        self.q3[Self::index(self.num_groups, yhat, a, y)]
    }

    pub fn q_ay(&self, a: usize, y: u8) -> f64 {
        self.q2[2 * a + y as usize]
    }

    pub fn table(&self) -> &[f64] {
        &self.q3
    }

    pub fn marginals(&self) -> &[f64] {
        &self.q2
    }

    pub fn min_q(&self) -> f64 {
        self.min_q
    }

    pub fn total(&self) -> f64 {
        self.q3.iter().sum()
    }
}

/// Joint statistics of hard `predictions` on `data`.
pub fn joint_stats(data: &Dataset, predictions: &[u8]) -> Result<JointStats> {
    if predictions.len() != data.m() {
        return Err(DataError::LengthMismatch {
            expected: data.m(),
            actual: predictions.len(),
        });
    }
    let g = data.num_groups();
    let mut counts = vec![0usize; 4 * g];
    for (r, &p) in data.records().iter().zip(predictions) {
        if p > 1 {
            return Err(DataError::Invalid(format!("prediction {p} not binary")));
        }
        counts[JointStats::index(g, p, r.group, r.label)] += 1;
    }
    let m = data.m() as f64;
    Ok(JointStats::from_table(
        g,
        counts.into_iter().map(|c| c as f64 / m).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FOUR_ROWS: &str = "f1,group,label\n0.5,R,1\n1.5,B,0\n-2,R,0\n3.25,R,1\n";

    #[test]
    fn groups_reindexed_with_most_frequent_anchor() {
        let data = read_csv(FOUR_ROWS.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(data.m(), 4);
        assert_eq!(data.num_groups(), 2);
        assert_eq!(data.group_names(), ["R", "B"]);
        assert_eq!(data.record(0).group, 0);
        assert_eq!(data.record(1).group, 1);
        assert_eq!(data.record(1).x, vec![1.5]);
    }

    #[test]
    fn explicit_anchor_overrides_frequency() {
        let schema = CsvSchema {
            anchor: Some("B".into()),
            ..CsvSchema::default()
        };
        let data = read_csv(FOUR_ROWS.as_bytes(), &schema).unwrap();
        assert_eq!(data.group_names(), ["B", "R"]);
        assert_eq!(data.record(1).group, 0);
    }

    #[test]
    fn frequency_ties_go_to_lowest_value() {
        let csv = "x,group,label\n1,b,0\n2,a,1\n3,c,0\n4,b,1\n5,a,0\n";
        let data = read_csv(csv.as_bytes(), &CsvSchema::default()).unwrap();
        assert_eq!(data.group_names(), ["a", "b", "c"]);
    }

    #[test]
    fn non_binary_label_reports_line() {
        let csv = "x,group,label\n1,a,0\n2,a,2\n";
        let err = read_csv(csv.as_bytes(), &CsvSchema::default()).unwrap_err();
        assert!(matches!(err, DataError::LabelNotBinary { line: 3 }), "{err}");
        assert_eq!(err.to_string(), "label not binary at line 3");
    }

    #[test]
    fn malformed_feature_reports_line() {
        let csv = "x,group,label\n1,a,0\nabc,a,1\n";
        let err = read_csv(csv.as_bytes(), &CsvSchema::default()).unwrap_err();
        assert!(matches!(err, DataError::Malformed { line: 3, .. }), "{err}");
    }

    #[test]
    fn missing_columns_are_schema_errors() {
        let csv = "x,grp,label\n1,a,0\n";
        let err = read_csv(csv.as_bytes(), &CsvSchema::default()).unwrap_err();
        assert!(matches!(err, DataError::Schema(_)));
        let csv = "x,group,y\n1,a,0\n";
        let err = read_csv(csv.as_bytes(), &CsvSchema::default()).unwrap_err();
        assert!(matches!(err, DataError::Schema(_)));
    }

    #[test]
    fn degenerate_cell_loads_but_fails_strict() {
        let csv = "x,group,label\n1,a,0\n2,a,1\n3,b,1\n4,b,1\n5,a,0\n";
        let data = read_csv(csv.as_bytes(), &CsvSchema::default()).unwrap();
        let report = data.validate();
        assert_eq!(report.degenerate_cells, vec![(1, 0)]);
        assert!(report.describe().contains("degenerate cell (1,0)"));
        assert!(data.validate_strict().is_err());
    }

    #[test]
    fn joint_stats_single_record() {
        let data = Dataset::new(vec![Record::new(vec![0.0], 0, 1)], 2, 1).unwrap();
        let stats = joint_stats(&data, &[1]).unwrap();
        assert_eq!(stats.q(1, 0, 1), 1.0);
        let nonzero = stats.table().iter().filter(|&&q| q != 0.0).count();
        assert_eq!(nonzero, 1);
        assert_eq!(stats.q_ay(0, 1), 1.0);
    }

    #[test]
    fn joint_stats_four_cells() {
        let records = vec![
            Record::new(vec![0.0], 0, 0),
            Record::new(vec![0.0], 0, 1),
            Record::new(vec![0.0], 1, 0),
            Record::new(vec![0.0], 1, 1),
        ];
        let data = Dataset::new(records, 2, 1).unwrap();
        let stats = joint_stats(&data, &[1, 1, 1, 1]).unwrap();
        for a in 0..2 {
            for y in 0..2 {
                assert_eq!(stats.q(1, a, y), 0.25);
                assert_eq!(stats.q(0, a, y), 0.0);
            }
        }
        assert_eq!(stats.min_q(), 0.25);
    }

    #[test]
    fn joint_stats_length_mismatch() {
        let data = Dataset::new(vec![Record::new(vec![0.0], 0, 1)], 1, 1).unwrap();
        assert!(matches!(
            joint_stats(&data, &[1, 0]),
            Err(DataError::LengthMismatch { expected: 1, actual: 2 })
        ));
    }

    #[test]
    fn synth_is_deterministic() {
        let cfg = SynthConfig {
            seed: 11,
            m: 300,
            num_groups: 3,
            dim: 2,
            bias: 0.4,
        };
        assert_eq!(synth_generate(&cfg).unwrap(), synth_generate(&cfg).unwrap());
        let other = SynthConfig { seed: 12, ..cfg };
        assert_ne!(synth_generate(&cfg).unwrap(), synth_generate(&other).unwrap());
    }

    #[test]
    fn synth_rejects_small_m() {
        let cfg = SynthConfig {
            seed: 1,
            m: 3,
            num_groups: 2,
            dim: 1,
            bias: 0.0,
        };
        assert!(synth_generate(&cfg).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let cfg = SynthConfig {
            seed: 5,
            m: 200,
            num_groups: 3,
            dim: 3,
            bias: 0.2,
        };
        let data = synth_generate(&cfg).unwrap();
        let mut buf = Vec::new();
        data.to_csv_writer(&mut buf).unwrap();
        let back = read_csv(buf.as_slice(), &CsvSchema::default()).unwrap();
        assert_eq!(back, data);
    }
}
