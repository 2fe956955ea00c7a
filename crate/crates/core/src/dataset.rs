//! Dataset ingestion: built-in schemas for the four UCI classification sets,
//! CSV loading, train-only min/max normalization and stratified splitting.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Field separator of a raw data file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Delimiter {
    Comma,
    /// Runs of spaces or tabs (the UCI seeds file mixes both).
    Whitespace,
}

/// Column layout of a raw data file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub name: String,
    /// File name looked up inside the data directory.
    pub file_name: String,
    /// Total number of columns per row, including label and ignored columns.
    pub n_columns: usize,
    pub label_column: usize,
    /// Columns that are neither features nor the label (row ids).
    pub ignored_columns: Vec<usize>,
    pub feature_names: Vec<String>,
    pub delimiter: Delimiter,
    pub default_test_fraction: f64,
    pub url: String,
    /// Feature count as listed in the published dataset table. For Glass and
    /// Banknote this includes the id or label column; `feature_names.len()`
    /// is what the models actually see.
    pub published_feature_count: usize,
}

impl DatasetSchema {
    pub fn feature_columns(&self) -> Vec<usize> {
        (0..self.n_columns)
            .filter(|c| *c != self.label_column && !self.ignored_columns.contains(c))
            .collect()
    }
}

/// The four built-in datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetName {
    Wine,
    Glass,
    Seeds,
    Banknote,
}

impl DatasetName {
    pub const ALL: [DatasetName; 4] = [
        DatasetName::Wine,
        DatasetName::Glass,
        DatasetName::Seeds,
        DatasetName::Banknote,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetName::Wine => "wine",
            DatasetName::Glass => "glass",
            DatasetName::Seeds => "seeds",
            DatasetName::Banknote => "banknote",
        }
    }

    pub fn schema(self) -> DatasetSchema {
        let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        match self {
            DatasetName::Wine => DatasetSchema {
                name: "wine".into(),
                file_name: "wine.data".into(),
                n_columns: 14,
                label_column: 0,
                ignored_columns: vec![],
                feature_names: names(&[
                    "alcohol",
                    "malic_acid",
                    "ash",
                    "alcalinity_of_ash",
                    "magnesium",
                    "total_phenols",
                    "flavanoids",
                    "nonflavanoid_phenols",
                    "proanthocyanins",
                    "color_intensity",
                    "hue",
                    "od280_od315",
                    "proline",
                ]),
                delimiter: Delimiter::Comma,
                default_test_fraction: 0.1,
                url: "https://archive.ics.uci.edu/ml/datasets/wine".into(),
                published_feature_count: 13,
            },
            DatasetName::Glass => DatasetSchema {
                name: "glass".into(),
                file_name: "glass.data".into(),
                n_columns: 11,
                label_column: 10,
                ignored_columns: vec![0],
                feature_names: names(&["RI", "Na", "Mg", "Al", "Si", "K", "Ca", "Ba", "Fe"]),
                delimiter: Delimiter::Comma,
                default_test_fraction: 0.1,
                url: "https://archive.ics.uci.edu/ml/datasets/glass+identification".into(),
                published_feature_count: 10,
            },
            DatasetName::Seeds => DatasetSchema {
                name: "seeds".into(),
                file_name: "seeds_dataset.txt".into(),
                n_columns: 8,
                label_column: 7,
                ignored_columns: vec![],
                feature_names: names(&[
                    "area",
                    "perimeter",
                    "compactness",
                    "kernel_length",
                    "kernel_width",
                    "asymmetry",
                    "groove_length",
                ]),
                delimiter: Delimiter::Whitespace,
                default_test_fraction: 0.1,
                url: "https://archive.ics.uci.edu/ml/datasets/seeds".into(),
                published_feature_count: 7,
            },
            DatasetName::Banknote => DatasetSchema {
                name: "banknote".into(),
                file_name: "data_banknote_authentication.txt".into(),
                n_columns: 5,
                label_column: 4,
                ignored_columns: vec![],
                feature_names: names(&["variance", "skewness", "curtosis", "entropy"]),
                delimiter: Delimiter::Comma,
                default_test_fraction: 0.1,
                url: "https://archive.ics.uci.edu/ml/datasets/banknote+authentication".into(),
                published_feature_count: 5,
            },
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wine" => Ok(DatasetName::Wine),
            "glass" => Ok(DatasetName::Glass),
            "seeds" => Ok(DatasetName::Seeds),
            "banknote" => Ok(DatasetName::Banknote),
            other => Err(Error::Config(format!(
                "unknown dataset `{other}` (expected one of wine, glass, seeds, banknote)"
            ))),
        }
    }
}

/// Per-feature `(min, max)` recorded from training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub ranges: Vec<(f64, f64)>,
}

impl Normalization {
    pub fn apply(&self, feature: usize, v: f64) -> f64 {
        let (lo, hi) = self.ranges[feature];
        (v - lo) / (hi - lo)
    }

    pub fn invert(&self, feature: usize, v: f64) -> f64 {
        let (lo, hi) = self.ranges[feature];
        v * (hi - lo) + lo
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    /// Row-major samples.
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub feature_names: Vec<String>,
    /// Raw label strings, indexed by class id (first-appearance order).
    pub class_names: Vec<String>,
    pub n_classes: usize,
    pub normalization: Option<Normalization>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self> {
        let name = name.into();
        if features.is_empty() {
            return Err(Error::EmptyDataset(name));
        }
        let p = features[0].len();
        if let Some((row, r)) = features.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(Error::Parse {
                row: row + 1,
                message: format!("expected {p} features, found {}", r.len()),
            });
        }
        if labels.len() != features.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                actual: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Parse {
                row: 0,
                message: format!("label {bad} outside 0..{n_classes}"),
            });
        }
        Ok(Dataset {
            name,
            feature_names: (0..p).map(|a| format!("f{a}")).collect(),
            class_names: (0..n_classes).map(|k| k.to_string()).collect(),
            features,
            labels,
            n_classes,
            normalization: None,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Copy of the rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            n_classes: self.n_classes,
            normalization: self.normalization.clone(),
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// Train/test partition of a dataset's rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
}

fn is_missing(field: &str) -> bool {
    let f = field.trim();
    f.is_empty() || f == "?" || f.eq_ignore_ascii_case("na") || f.eq_ignore_ascii_case("nan")
}

fn split_fields(line: &str, delimiter: Delimiter) -> Vec<&str> {
    match delimiter {
        Delimiter::Comma => line.split(',').map(str::trim).collect(),
        Delimiter::Whitespace => line.split_whitespace().collect(),
    }
}

/// Parses a data file according to `schema`.
///
/// Features are returned un-normalized; class labels are re-mapped to
/// `0..k` in order of first appearance. A first row whose feature fields do
/// not parse as numbers is treated as a header.
pub fn load_csv(path: &Path, schema: &DatasetSchema) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_records(&text, schema)
}

pub fn parse_records(text: &str, schema: &DatasetSchema) -> Result<Dataset> {
    let feature_cols = schema.feature_columns();
    let mut rows: Vec<(usize, Vec<&str>)> = Vec::new();
    match schema.delimiter {
        Delimiter::Comma => {
            // The csv reader handles quoting; row numbers are 1-based lines.
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(false)
                .flexible(true)
                .trim(csv::Trim::All)
                .from_reader(text.as_bytes());
            let mut owned: Vec<(usize, csv::StringRecord)> = Vec::new();
            for rec in reader.records() {
                let rec = rec.map_err(|e| Error::Parse {
                    row: e.position().map(|p| p.line() as usize).unwrap_or(0),
                    message: e.to_string(),
                })?;
                let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
                if rec.iter().all(|f| f.is_empty()) {
                    continue;
                }
                owned.push((line, rec));
            }
            return build_dataset(
                owned
                    .iter()
                    .map(|(line, rec)| (*line, rec.iter().collect::<Vec<_>>()))
                    .collect(),
                schema,
                &feature_cols,
            );
        }
        Delimiter::Whitespace => {
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                rows.push((i + 1, split_fields(line, schema.delimiter)));
            }
        }
    }
    build_dataset(rows, schema, &feature_cols)
}

fn build_dataset(
    mut rows: Vec<(usize, Vec<&str>)>,
    schema: &DatasetSchema,
    feature_cols: &[usize],
) -> Result<Dataset> {
    if let Some((_, first)) = rows.first() {
        let header = first.len() == schema.n_columns
            && feature_cols
                .iter()
                .any(|&c| !is_missing(first[c]) && first[c].parse::<f64>().is_err());
        if header {
            rows.remove(0);
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset(schema.name.clone()));
    }

    let mut features = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    let mut class_ids: HashMap<String, usize> = HashMap::new();
    let mut class_names = Vec::new();
    for (line, fields) in rows {
        if fields.len() != schema.n_columns {
            return Err(Error::Parse {
                row: line,
                message: format!(
                    "expected {} columns, found {}",
                    schema.n_columns,
                    fields.len()
                ),
            });
        }
        let mut row = Vec::with_capacity(feature_cols.len());
        for &c in feature_cols {
            let field = fields[c];
            if is_missing(field) {
                return Err(Error::Parse {
                    row: line,
                    message: format!("missing value in column {c}"),
                });
            }
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row: line,
                message: format!("non-numeric value `{field}` in column {c}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row: line,
                    message: format!("non-finite value `{field}` in column {c}"),
                });
            }
            row.push(v);
        }
        let raw_label = fields[schema.label_column].trim();
        if is_missing(raw_label) {
            return Err(Error::Parse {
                row: line,
                message: "missing class label".into(),
            });
        }
        let next = class_ids.len();
        let id = *class_ids.entry(raw_label.to_string()).or_insert_with(|| {
            class_names.push(raw_label.to_string());
            next
        });
        features.push(row);
        labels.push(id);
    }

    Ok(Dataset {
        name: schema.name.clone(),
        features,
        labels,
        feature_names: schema.feature_names.clone(),
        n_classes: class_names.len(),
        class_names,
        normalization: None,
    })
}

/// Loads a built-in dataset from `data_dir`.
pub fn load_named(name: DatasetName, data_dir: &Path) -> Result<Dataset> {
    let schema = name.schema();
    load_csv(&data_dir.join(&schema.file_name), &schema)
}

/// Min/max scales every row using statistics of the training rows only.
/// Test rows may land outside `[0, 1]`; they are not clipped.
pub fn normalize(ds: &Dataset, stats_source: &Split) -> Result<Dataset> {
    if stats_source.train_indices.is_empty() {
        return Err(Error::InvalidSplit(
            "no training rows to take statistics from".into(),
        ));
    }
    let p = ds.n_features();
    let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); p];
    for &i in &stats_source.train_indices {
        for (a, &v) in ds.features[i].iter().enumerate() {
            ranges[a].0 = ranges[a].0.min(v);
            ranges[a].1 = ranges[a].1.max(v);
        }
    }
    for (a, &(lo, hi)) in ranges.iter().enumerate() {
        if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
            return Err(Error::ConstantFeature {
                column: ds.feature_names[a].clone(),
                index: a,
            });
        }
    }
    let norm = Normalization { ranges };
    let features = ds
        .features
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(a, &v)| norm.apply(a, v))
                .collect()
        })
        .collect();
    Ok(Dataset {
        features,
        normalization: Some(norm),
        ..ds.clone()
    })
}

/// Number of test rows for `n` rows at `test_fraction`; Table-style sizes
/// round up (178 rows at 0.1 gives 18).
pub fn test_size(n: usize, test_fraction: f64) -> usize {
    ((n as f64) * test_fraction - 1e-9).ceil().max(0.0) as usize
}

/// Stratified, seed-deterministic train/test split.
///
/// The test quota `ceil(n * test_fraction)` is distributed over classes by
/// largest remainder, so each class's test share is within one row of
/// `test_fraction`. Classes with a single row stay in training.
pub fn split(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<Split> {
    let n = ds.n_rows();
    if n == 0 {
        return Err(Error::EmptyDataset(ds.name.clone()));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidSplit(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let n_test = test_size(n, test_fraction);
    if n_test == 0 || n_test >= n {
        return Err(Error::InvalidSplit(format!(
            "test fraction {test_fraction} of {n} rows leaves an empty side"
        )));
    }

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.n_classes];
    for (i, &l) in ds.labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut quotas: Vec<usize> = Vec::with_capacity(ds.n_classes);
    let mut remainders: Vec<(f64, usize)> = Vec::new();
    for (k, members) in by_class.iter().enumerate() {
        let exact = members.len() as f64 * test_fraction;
        quotas.push(exact.floor() as usize);
        remainders.push((exact - exact.floor(), k));
    }
    let assigned: usize = quotas.iter().sum();
    let mut missing = n_test.saturating_sub(assigned);
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    while missing > 0 {
        let before = missing;
        for &(_, k) in &remainders {
            if missing == 0 {
                break;
            }
            // keep at least one training row per class
            if quotas[k] + 1 < by_class[k].len() {
                quotas[k] += 1;
                missing -= 1;
            }
        }
        if missing == before {
            break;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(n - n_test);
    let mut test = Vec::with_capacity(n_test);
    for (k, members) in by_class.iter().enumerate() {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        test.extend_from_slice(&shuffled[..quotas[k]]);
        train.extend_from_slice(&shuffled[quotas[k]..]);
    }
    if test.is_empty() || train.is_empty() {
        return Err(Error::InvalidSplit(
            "stratification left an empty side".into(),
        ));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split {
        train_indices: train,
        test_indices: test,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(features: Vec<Vec<f64>>, labels: Vec<usize>, k: usize) -> Dataset {
        Dataset::new("toy", features, labels, k).unwrap()
    }

    #[test]
    fn normalizes_with_training_statistics() {
        let ds = toy(
            vec![vec![2.0], vec![4.0], vec![6.0], vec![8.0]],
            vec![0, 0, 1, 1],
            2,
        );
        let split = Split {
            train_indices: vec![0, 1, 2],
            test_indices: vec![3],
            seed: 0,
        };
        let norm = normalize(&ds, &split).unwrap();
        assert_eq!(norm.features[0][0], 0.0);
        assert_eq!(norm.features[1][0], 0.5);
        assert_eq!(norm.features[2][0], 1.0);
        // test row extrapolates without clipping
        assert_eq!(norm.features[3][0], 1.5);
        assert_eq!(norm.normalization.unwrap().ranges, vec![(2.0, 6.0)]);
    }

    #[test]
    fn constant_training_column_is_rejected() {
        let ds = toy(
            vec![vec![5.0, 1.0], vec![5.0, 2.0], vec![5.0, 3.0]],
            vec![0, 1, 0],
            2,
        );
        let split = Split {
            train_indices: vec![0, 1, 2],
            test_indices: vec![],
            seed: 0,
        };
        match normalize(&ds, &split) {
            Err(Error::ConstantFeature { index, .. }) => assert_eq!(index, 0),
            other => panic!("expected constant-feature error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        let schema = DatasetName::Wine.schema();
        assert!(matches!(
            parse_records("", &schema),
            Err(Error::EmptyDataset(_))
        ));
        assert!(matches!(
            parse_records("\n\n", &schema),
            Err(Error::EmptyDataset(_))
        ));
    }

    #[test]
    fn wrong_arity_reports_row() {
        let schema = DatasetName::Banknote.schema();
        let text = "1.0,2.0,3.0,4.0,0\n1.0,2.0,3.0,0\n";
        match parse_records(text, &schema) {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_and_missing_values_are_rejected() {
        let schema = DatasetName::Banknote.schema();
        let bad = "1.0,2.0,3.0,4.0,0\n1.0,x,3.0,4.0,1\n";
        assert!(matches!(
            parse_records(bad, &schema),
            Err(Error::Parse { row: 2, .. })
        ));
        let missing = "1.0,2.0,3.0,4.0,0\n1.0,?,3.0,4.0,1\n";
        assert!(matches!(
            parse_records(missing, &schema),
            Err(Error::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn header_is_detected_and_labels_remapped() {
        let schema = DatasetName::Banknote.schema();
        let text = "variance,skewness,curtosis,entropy,class\n1,2,3,4,b\n5,6,7,8,a\n9,1,2,3,b\n";
        let ds = parse_records(text, &schema).unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.labels, vec![0, 1, 0]);
        assert_eq!(ds.class_names, vec!["b", "a"]);
    }

    #[test]
    fn whitespace_schema_parses_mixed_separators() {
        let schema = DatasetName::Seeds.schema();
        let text = "15.26\t14.84\t0.871\t5.763\t3.312\t2.221\t5.22\t1\n14.88  14.57\t\t0.8811\t5.554\t3.333\t1.018\t4.956\t2\n";
        let ds = parse_records(text, &schema).unwrap();
        assert_eq!(ds.n_features(), 7);
        assert_eq!(ds.labels, vec![0, 1]);
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let features: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64]).collect();
        let labels: Vec<usize> = (0..50).map(|i| i % 3).collect();
        let ds = toy(features, labels, 3);
        let a = split(&ds, 0.2, 7).unwrap();
        let b = split(&ds, 0.2, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.test_indices.len(), 10);
        let mut all: Vec<usize> = a
            .train_indices
            .iter()
            .chain(&a.test_indices)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn split_rejects_empty_side() {
        let ds = toy(vec![vec![0.0], vec![1.0], vec![2.0]], vec![0, 1, 0], 2);
        assert!(split(&ds, 0.99, 0).is_err());
        assert!(split(&ds, 1.0, 0).is_err());
        assert!(split(&ds, 0.0, 0).is_err());
    }

    #[test]
    fn published_sizes_round_up() {
        assert_eq!(test_size(178, 0.1), 18);
        assert_eq!(test_size(214, 0.1), 22);
        assert_eq!(test_size(210, 0.1), 21);
        assert_eq!(test_size(1372, 0.1), 138);
    }

    #[test]
    fn unknown_dataset_name() {
        assert!("iris".parse::<DatasetName>().is_err());
        assert_eq!("Wine".parse::<DatasetName>().unwrap(), DatasetName::Wine);
    }
}
