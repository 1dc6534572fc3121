//! Dataset container and CSV ingestion.
//!
//! Features are dense `f64` matrices; labels are remapped onto
//! contiguous class ids `0..K` with the original label text retained
//! for reporting. Loaders reject missing or non-finite values rather
//! than imputing.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Immutable labeled dataset shared by every inference routine.
#[derive(Debug, Clone)]
pub struct Dataset {
    n_rows: usize,
    n_dims: usize,
    /// Row-major feature matrix, `n_rows * n_dims` entries.
    features: Vec<f64>,
    /// Dense class ids in `0..num_classes`.
    labels: Vec<usize>,
    num_classes: usize,
    /// Original label text per dense class id.
    label_names: Vec<String>,
    /// Sorted distinct feature values per dimension.
    unique_values: Vec<Vec<f64>>,
}

impl Dataset {
    /// Builds a dataset from feature rows and dense labels already in
    /// `0..num_classes`.
    pub fn from_rows(
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        let names = (0..num_classes).map(|c| c.to_string()).collect();
        Self::from_rows_named(rows, labels, num_classes, names)
    }

    pub fn from_rows_named(
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        num_classes: usize,
        label_names: Vec<String>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid_parameter("dataset needs at least one row"));
        }
        if rows.len() != labels.len() {
            return Err(Error::invalid_parameter(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if num_classes < 2 {
            return Err(Error::invalid_parameter(
                "dataset needs at least two classes",
            ));
        }
        if label_names.len() != num_classes {
            return Err(Error::invalid_parameter(
                "label_names length must equal num_classes",
            ));
        }
        let n_dims = rows[0].len();
        if n_dims == 0 {
            return Err(Error::invalid_parameter(
                "dataset needs at least one feature dimension",
            ));
        }
        let n_rows = rows.len();
        let mut features = Vec::with_capacity(n_rows * n_dims);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_dims {
                return Err(Error::invalid_parameter(format!(
                    "row {i} has {} features, expected {n_dims}",
                    row.len()
                )));
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(Error::invalid_parameter(format!(
                        "row {i} contains a non-finite feature value"
                    )));
                }
            }
            features.extend_from_slice(row);
        }
        for (i, &y) in labels.iter().enumerate() {
            if y >= num_classes {
                return Err(Error::invalid_parameter(format!(
                    "label {y} at row {i} outside 0..{num_classes}"
                )));
            }
        }
        let unique_values = (0..n_dims)
            .map(|d| {
                let mut col: Vec<f64> = (0..n_rows).map(|r| features[r * n_dims + d]).collect();
                col.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
                col.dedup();
                col
            })
            .collect();
        Ok(Dataset {
            n_rows,
            n_dims,
            features,
            labels,
            num_classes,
            label_names,
            unique_values,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    #[inline]
    pub fn x(&self, row: usize, dim: usize) -> f64 {
        self.features[row * self.n_dims + dim]
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.features[row * self.n_dims..(row + 1) * self.n_dims]
    }

    #[inline]
    pub fn label(&self, row: usize) -> usize {
        self.labels[row]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    /// Sorted distinct values observed along `dim`.
    pub fn unique_values(&self, dim: usize) -> &[f64] {
        &self.unique_values[dim]
    }

    /// Class histogram over all rows.
    pub fn class_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        let picked: Vec<Vec<f64>> = rows.iter().map(|&r| self.row(r).to_vec()).collect();
        let labels: Vec<usize> = rows.iter().map(|&r| self.labels[r]).collect();
        Dataset::from_rows_named(
            picked,
            labels,
            self.num_classes,
            self.label_names.clone(),
        )
    }
}

/// Source description for a labeled CSV-like file pair.
#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub data_path: PathBuf,
    /// Predefined held-out file; when absent, `split_fraction` applies.
    pub test_path: Option<PathBuf>,
    /// Separate label file (one label per line), for corpora that ship
    /// features and labels apart.
    pub labels_path: Option<PathBuf>,
    /// Matching label file for `test_path`.
    pub test_labels_path: Option<PathBuf>,
    /// Zero-based label column; defaults to the last column.
    pub label_col: Option<usize>,
    pub delimiter: u8,
    pub split_fraction: f64,
    pub split_seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            data_path: PathBuf::new(),
            test_path: None,
            labels_path: None,
            test_labels_path: None,
            label_col: None,
            delimiter: b',',
            split_fraction: 0.7,
            split_seed: 1,
        }
    }
}

struct RawTable {
    rows: Vec<Vec<f64>>,
    raw_labels: Vec<String>,
}

fn read_table(
    path: &Path,
    labels_path: Option<&Path>,
    label_col: Option<usize>,
    delimiter: u8,
) -> Result<RawTable> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::data(&display, e.to_string()))?;

    let mut rows = Vec::new();
    let mut raw_labels = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::data(&display, e.to_string()))?;
        let mut fields: Vec<&str> = record.iter().map(str::trim).collect();
        if delimiter == b' ' {
            // Runs of spaces and trailing spaces show up as empty fields.
            fields.retain(|f| !f.is_empty());
        }
        if fields.is_empty() {
            continue;
        }
        let w = *width.get_or_insert(fields.len());
        if fields.len() != w {
            return Err(Error::data(
                &display,
                format!("row {} has {} columns, expected {w}", i + 1, fields.len()),
            ));
        }
        let label_idx = if labels_path.is_some() {
            None
        } else {
            let idx = label_col.unwrap_or(w - 1);
            if idx >= w {
                return Err(Error::data(
                    &display,
                    format!("label column {idx} outside 0..{w}"),
                ));
            }
            Some(idx)
        };
        let mut row = Vec::with_capacity(w.saturating_sub(1));
        for (j, field) in fields.iter().enumerate() {
            if Some(j) == label_idx {
                raw_labels.push((*field).to_string());
                continue;
            }
            if field.is_empty() {
                return Err(Error::data(
                    &display,
                    format!("missing value at row {}, column {}", i + 1, j + 1),
                ));
            }
            let value: f64 = field.parse().map_err(|_| {
                let hint = if i == 0 {
                    " (is the first line a header?)"
                } else {
                    ""
                };
                Error::data(
                    &display,
                    format!("row {}, column {}: {field:?} is not numeric{hint}", i + 1, j + 1),
                )
            })?;
            if !value.is_finite() {
                return Err(Error::data(
                    &display,
                    format!("row {}, column {}: non-finite value", i + 1, j + 1),
                ));
            }
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::data(&display, "file contains no data rows"));
    }

    if let Some(lp) = labels_path {
        let ldisplay = lp.display().to_string();
        let text = std::fs::read_to_string(lp)?;
        raw_labels = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect();
        if raw_labels.len() != rows.len() {
            return Err(Error::data(
                &ldisplay,
                format!("{} labels for {} rows", raw_labels.len(), rows.len()),
            ));
        }
    }
    Ok(RawTable { rows, raw_labels })
}

/// Deterministic dense mapping of raw label text: numeric labels sort
/// by value, anything else lexicographically.
fn label_mapping(tables: &[&RawTable]) -> Vec<String> {
    let mut distinct: Vec<String> = Vec::new();
    for t in tables {
        for l in &t.raw_labels {
            if !distinct.contains(l) {
                distinct.push(l.clone());
            }
        }
    }
    let all_numeric = distinct.iter().all(|l| l.parse::<f64>().is_ok());
    if all_numeric {
        distinct.sort_by(|a, b| {
            let (x, y): (f64, f64) = (a.parse().unwrap(), b.parse().unwrap());
            x.partial_cmp(&y).expect("finite labels")
        });
    } else {
        distinct.sort();
    }
    distinct
}

fn densify(table: RawTable, names: &[String], path: &Path) -> Result<Dataset> {
    let labels = table
        .raw_labels
        .iter()
        .map(|l| {
            names
                .iter()
                .position(|n| n == l)
                .ok_or_else(|| Error::data(path.display().to_string(), format!("unknown label {l:?}")))
        })
        .collect::<Result<Vec<usize>>>()?;
    Dataset::from_rows_named(table.rows, labels, names.len(), names.to_vec())
}

/// Loads a single CSV file into a dataset with its own label mapping.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_col: Option<usize>,
    delimiter: u8,
) -> Result<Dataset> {
    let path = path.as_ref();
    let table = read_table(path, None, label_col, delimiter)?;
    let names = label_mapping(&[&table]);
    if names.len() < 2 {
        return Err(Error::data(
            path.display().to_string(),
            "fewer than two distinct labels",
        ));
    }
    densify(table, &names, path)
}

/// Resolves a [`DatasetSpec`] into train and test datasets sharing one
/// label mapping, either from a predefined test file or by splitting.
pub fn load(spec: &DatasetSpec) -> Result<(Dataset, Dataset)> {
    let train_table = read_table(
        &spec.data_path,
        spec.labels_path.as_deref(),
        spec.label_col,
        spec.delimiter,
    )?;
    match &spec.test_path {
        Some(tp) => {
            let test_table = read_table(
                tp,
                spec.test_labels_path.as_deref(),
                spec.label_col,
                spec.delimiter,
            )?;
            let names = label_mapping(&[&train_table, &test_table]);
            if names.len() < 2 {
                return Err(Error::data(
                    spec.data_path.display().to_string(),
                    "fewer than two distinct labels",
                ));
            }
            let train = densify(train_table, &names, &spec.data_path)?;
            let test = densify(test_table, &names, tp)?;
            Ok((train, test))
        }
        None => {
            let names = label_mapping(&[&train_table]);
            if names.len() < 2 {
                return Err(Error::data(
                    spec.data_path.display().to_string(),
                    "fewer than two distinct labels",
                ));
            }
            let full = densify(train_table, &names, &spec.data_path)?;
            split(&full, spec.split_fraction, spec.split_seed)
        }
    }
}

/// Number of training rows assigned by `split` for a given fraction.
pub fn train_size(n_rows: usize, fraction: f64) -> usize {
    (fraction * n_rows as f64).ceil() as usize
}

/// Splits rows by a seeded uniform permutation; the first
/// `ceil(fraction * n)` permuted rows form the training set.
pub fn split(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid_parameter(format!(
            "split fraction must lie strictly between 0 and 1, got {fraction}"
        )));
    }
    let n = data.n_rows();
    let take = train_size(n, fraction);
    if take == 0 || take >= n {
        return Err(Error::invalid_parameter(format!(
            "split leaves an empty set: {take} of {n} rows for training"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let train = data.subset(&order[..take])?;
    let test = data.subset(&order[take..])?;
    Ok((train, test))
}
