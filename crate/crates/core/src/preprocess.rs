//! CSV ingestion, per-feature k-means discretization and seeded
//! train/test splitting.

use std::io::Read;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureKind};
use crate::error::{Error, Result};

/// Derives an independent RNG stream from a base seed; adding streams never
/// perturbs earlier ones.
pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Options for CSV ingestion. The final column is always the class label;
/// label tokens are re-encoded to 1..r in first-appearance order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvOptions {
    /// None auto-detects a header row by trying to parse the first row's
    /// feature cells as numbers.
    pub header: Option<bool>,
    /// Treat every feature as continuous, disabling categorical inference.
    pub force_continuous: bool,
    /// Integer-valued columns within 1..=this are flagged categorical.
    pub max_categorical_cardinality: usize,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            header: None,
            force_continuous: false,
            max_categorical_cardinality: 20,
        }
    }
}

pub fn load_csv(path: &Path, options: &CsvOptions) -> Result<Dataset> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot open {}: {e}", path.display())))?;
    load_csv_reader(file, options)
}

pub fn load_csv_reader<R: Read>(reader: R, options: &CsvOptions) -> Result<Dataset> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    for (index, record) in csv_reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            row: index + 1,
            message: e.to_string(),
        })?;
        let cells: Vec<String> = record.iter().map(|c| c.to_string()).collect();
        if cells.iter().all(|c| c.is_empty()) {
            continue; // skip blank lines
        }
        rows.push((index + 1, cells));
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            row: 1,
            message: "file holds no data rows".into(),
        });
    }
    let width = rows[0].1.len();
    if width < 2 {
        return Err(Error::Parse {
            row: rows[0].0,
            message: "rows need at least one feature column and a label column".into(),
        });
    }
    for (row, cells) in &rows {
        if cells.len() != width {
            return Err(Error::Parse {
                row: *row,
                message: format!("row has {} columns, expected {width}", cells.len()),
            });
        }
    }

    let has_header = match options.header {
        Some(explicit) => explicit,
        None => {
            // a header is assumed when any feature cell of the first row is
            // not numeric; the label column may legitimately hold strings
            rows.len() > 1
                && rows[0].1[..width - 1]
                    .iter()
                    .any(|c| c.parse::<f64>().is_err())
        }
    };
    let data_rows = if has_header { &rows[1..] } else { &rows[..] };
    if data_rows.is_empty() {
        return Err(Error::Parse {
            row: rows[0].0,
            message: "file holds a header but no data rows".into(),
        });
    }

    let n = width - 1;
    let mut features = Vec::with_capacity(data_rows.len() * n);
    let mut label_tokens: Vec<String> = Vec::new();
    let mut labels = Vec::with_capacity(data_rows.len());
    for (row, cells) in data_rows {
        for (j, cell) in cells[..n].iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row: *row,
                message: format!("column {}: '{cell}' is not a number", j + 1),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row: *row,
                    message: format!("column {}: non-finite value", j + 1),
                });
            }
            features.push(value);
        }
        let token = &cells[n];
        let label = match label_tokens.iter().position(|t| t == token) {
            Some(pos) => pos + 1,
            None => {
                label_tokens.push(token.clone());
                label_tokens.len()
            }
        };
        labels.push(label);
    }
    if label_tokens.len() < 2 {
        return Err(Error::Schema(format!(
            "single-class dataset: every label is '{}'",
            label_tokens[0]
        )));
    }

    let m = data_rows.len();
    let schema: Vec<FeatureKind> = (0..n)
        .map(|j| {
            if options.force_continuous {
                return FeatureKind::Continuous;
            }
            let column = (0..m).map(|i| features[i * n + j]);
            infer_kind(column, options.max_categorical_cardinality)
        })
        .collect();
    Dataset::new(features, labels, schema, label_tokens.len())
}

fn infer_kind(column: impl Iterator<Item = f64>, max_cardinality: usize) -> FeatureKind {
    let mut max_value = 0.0f64;
    for v in column {
        if v.fract() != 0.0 || v < 1.0 || v > max_cardinality as f64 {
            return FeatureKind::Continuous;
        }
        max_value = max_value.max(v);
    }
    FeatureKind::Categorical {
        cardinality: max_value as usize,
    }
}

/// Serializes a dataset back to CSV; numeric values use the shortest
/// round-trip representation, labels their integer codes.
pub fn dataset_to_csv(data: &Dataset) -> String {
    let mut out = String::new();
    for i in 0..data.instance_count() {
        for v in data.row(i) {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{}\n", data.label(i)));
    }
    out
}

pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, dataset_to_csv(data))
        .map_err(|e| Error::with_context(format!("writing {}", path.display()), e.into()))
}

/// Per-feature centroids learned on training data; `None` marks columns
/// that were already categorical and pass through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretizer {
    pub columns: Vec<Option<Vec<f64>>>,
}

impl Discretizer {
    /// Cardinality of each output column after discretization.
    pub fn output_schema(&self, input: &[FeatureKind]) -> Vec<FeatureKind> {
        self.columns
            .iter()
            .zip(input)
            .map(|(col, kind)| match col {
                Some(centroids) => FeatureKind::Categorical {
                    cardinality: centroids.len(),
                },
                None => *kind,
            })
            .collect()
    }
}

/// Fits per-feature 1-D k-means with farthest-point seeding. Features with
/// fewer distinct values than bins keep those values as centroids.
pub fn fit_discretizer(train: &Dataset, bins: usize, seed: u64) -> Result<Discretizer> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!(
            "bins must be at least 2, got {bins}"
        )));
    }
    if !train.has_continuous() {
        return Err(Error::Schema(
            "no continuous features to discretize".into(),
        ));
    }
    let n = train.feature_count();
    let m = train.instance_count();
    let columns = (0..n)
        .map(|j| match train.schema()[j] {
            FeatureKind::Categorical { .. } => None,
            FeatureKind::Continuous => {
                let values: Vec<f64> = (0..m).map(|i| train.row(i)[j]).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, j as u64));
                Some(kmeans_1d(&values, bins, &mut rng))
            }
        })
        .collect();
    Ok(Discretizer { columns })
}

fn kmeans_1d(values: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    // collapse to (distinct value, multiplicity); Lloyd's statistics only
    // depend on these
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut distinct: Vec<f64> = Vec::new();
    let mut weight: Vec<f64> = Vec::new();
    for &v in &sorted {
        if distinct.last() == Some(&v) {
            *weight.last_mut().unwrap() += 1.0;
        } else {
            distinct.push(v);
            weight.push(1.0);
        }
    }
    if distinct.len() <= k {
        return distinct;
    }

    // farthest-point seeding from a random start
    let mut centroids = vec![distinct[rng.gen_range(0..distinct.len())]];
    while centroids.len() < k {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, &v) in distinct.iter().enumerate() {
            let d = centroids
                .iter()
                .map(|&c| (v - c).abs())
                .fold(f64::INFINITY, f64::min);
            if d > best.1 {
                best = (i, d);
            }
        }
        centroids.push(distinct[best.0]);
    }
    centroids.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut assignment = vec![usize::MAX; distinct.len()];
    for _pass in 0..100 {
        let mut changed = false;
        for (i, &v) in distinct.iter().enumerate() {
            let a = nearest(&centroids, v);
            if assignment[i] != a {
                assignment[i] = a;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![0.0; centroids.len()];
        let mut masses = vec![0.0; centroids.len()];
        for (i, &v) in distinct.iter().enumerate() {
            sums[assignment[i]] += v * weight[i];
            masses[assignment[i]] += weight[i];
        }
        for (c, (&s, &mass)) in centroids.iter_mut().zip(sums.iter().zip(&masses)) {
            if mass > 0.0 {
                *c = s / mass;
            } // empty clusters keep their centroid
        }
    }

    // drop clusters that own no value so codes stay contiguous
    let mut kept: Vec<f64> = centroids
        .iter()
        .enumerate()
        .filter(|(idx, _)| assignment.iter().any(|&a| a == *idx))
        .map(|(_, &c)| c)
        .collect();
    kept.sort_by(|a, b| a.partial_cmp(b).unwrap());
    kept.dedup();
    kept
}

fn nearest(centroids: &[f64], value: f64) -> usize {
    let mut best = 0;
    let mut best_distance = f64::INFINITY;
    for (i, &c) in centroids.iter().enumerate() {
        let d = (value - c).abs();
        if d < best_distance {
            best = i;
            best_distance = d;
        }
    }
    best
}

/// Maps every continuous value to the 1-based index of its nearest
/// centroid (ties toward the lower index); the output schema is fully
/// categorical.
pub fn apply_discretizer(discretizer: &Discretizer, data: &Dataset) -> Result<Dataset> {
    let n = data.feature_count();
    if discretizer.columns.len() != n {
        return Err(Error::Schema(format!(
            "discretizer covers {} columns, dataset has {n}",
            discretizer.columns.len()
        )));
    }
    for (j, (col, kind)) in discretizer.columns.iter().zip(data.schema()).enumerate() {
        match (col, kind) {
            (Some(_), FeatureKind::Continuous) => {}
            (None, FeatureKind::Categorical { .. }) => {}
            _ => {
                return Err(Error::Schema(format!(
                    "column {j} does not match the discretizer's schema"
                )))
            }
        }
    }
    let m = data.instance_count();
    let mut features = Vec::with_capacity(m * n);
    for i in 0..m {
        for (j, col) in discretizer.columns.iter().enumerate() {
            let v = data.row(i)[j];
            match col {
                Some(centroids) => features.push((nearest(centroids, v) + 1) as f64),
                None => features.push(v),
            }
        }
    }
    Dataset::new(
        features,
        data.labels().to_vec(),
        discretizer.output_schema(data.schema()),
        data.class_count(),
    )
}

/// A deterministic train/test split request.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
    pub repetition: u64,
}

impl SplitSpec {
    pub fn new(test_fraction: f64, seed: u64, repetition: u64) -> Result<Self> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "test fraction must lie in (0, 1), got {test_fraction}"
            )));
        }
        Ok(SplitSpec {
            test_fraction,
            seed,
            repetition,
        })
    }
}

const SPLIT_ATTEMPTS: usize = 100;

/// Shuffles deterministically from (seed, repetition) and cuts off the
/// first ceil((1 - f) * m) instances as training data. Re-shuffles until
/// both parts contain every class, erroring after 100 attempts.
pub fn split(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let m = data.instance_count();
    if m < 4 {
        return Err(Error::InvalidArgument(format!(
            "need at least 4 instances to split, got {m}"
        )));
    }
    let train_count = ((1.0 - spec.test_fraction) * m as f64).ceil() as usize;
    if train_count == 0 || train_count >= m {
        return Err(Error::InvalidArgument(format!(
            "test fraction {} leaves an empty part for {m} instances",
            spec.test_fraction
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, spec.repetition));
    let mut indices: Vec<usize> = (0..m).collect();
    for _ in 0..SPLIT_ATTEMPTS {
        indices.shuffle(&mut rng);
        let (train_idx, test_idx) = indices.split_at(train_count);
        if covers_all_classes(data, train_idx) && covers_all_classes(data, test_idx) {
            return Ok((data.subset(train_idx)?, data.subset(test_idx)?));
        }
    }
    Err(Error::Stratification {
        attempts: SPLIT_ATTEMPTS,
    })
}

fn covers_all_classes(data: &Dataset, indices: &[usize]) -> bool {
    let mut seen = vec![false; data.class_count()];
    for &i in indices {
        seen[data.label(i) - 1] = true;
    }
    seen.iter().all(|&s| s)
}
