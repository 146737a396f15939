//! Dataset ingestion and the presorted per-feature column index.
//!
//! Two text formats are read:
//!
//! * LIBSVM: `label idx:val idx:val ...` with 1-based feature ids. Absent
//!   entries are stored as `0.0`.
//! * CSV: comma-separated cells, label in the last column, optional header.
//!
//! Labels are arbitrary tokens. They are remapped to `0..K` by sorting the
//! distinct tokens (numerically when every token parses as a number,
//! lexicographically otherwise). A test file is loaded with the training
//! file's `label_names` as its label map so both share one mapping.

use std::cmp::Ordering;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataFormat {
    Libsvm,
    Csv,
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "libsvm" => Ok(DataFormat::Libsvm),
            "csv" => Ok(DataFormat::Csv),
            other => Err(Error::InvalidArgument(format!(
                "unknown data format `{other}` (expected libsvm or csv)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LoadOptions {
    pub format: DataFormat,
    /// Reuse an existing token -> class mapping (index = class).
    pub label_map: Option<Vec<String>>,
    /// Force the feature dimension; files with more features are rejected.
    pub n_features: Option<usize>,
    /// Skip the first non-empty CSV line.
    pub csv_header: bool,
}

impl LoadOptions {
    pub fn new(format: DataFormat) -> Self {
        LoadOptions {
            format,
            label_map: None,
            n_features: None,
            csv_header: false,
        }
    }
}

/// Immutable labelled samples with dense, column-major feature storage.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    n_samples: usize,
    n_features: usize,
    columns: Vec<f64>,
    labels: Vec<usize>,
    label_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from row-major features.
    pub fn from_rows(
        rows: &[Vec<f64>],
        labels: Vec<usize>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_features) {
            return Err(Error::DimensionMismatch {
                expected: n_features,
                actual: bad.len(),
            });
        }
        let n_samples = rows.len();
        let mut columns = vec![0.0; n_samples * n_features];
        for (i, row) in rows.iter().enumerate() {
            for (d, &v) in row.iter().enumerate() {
                columns[d * n_samples + i] = v;
            }
        }
        Self::from_columns(n_samples, n_features, columns, labels, label_names)
    }

    /// Builds a dataset with labels `0..n_classes` named by their index.
    pub fn with_numeric_labels(
        rows: &[Vec<f64>],
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self> {
        let names = (0..n_classes).map(|k| k.to_string()).collect();
        Self::from_rows(rows, labels, names)
    }

    fn from_columns(
        n_samples: usize,
        n_features: usize,
        columns: Vec<f64>,
        labels: Vec<usize>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::InvalidDataset("no samples".into()));
        }
        if n_features == 0 {
            return Err(Error::InvalidDataset("no features".into()));
        }
        if labels.len() != n_samples {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: n_samples,
            });
        }
        if label_names.len() < 2 {
            return Err(Error::InvalidDataset(format!(
                "need at least 2 classes, got {}",
                label_names.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= label_names.len()) {
            return Err(Error::InvalidDataset(format!(
                "label index {bad} out of range for {} classes",
                label_names.len()
            )));
        }
        if columns.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite feature value".into()));
        }
        Ok(Dataset {
            n_samples,
            n_features,
            columns,
            labels,
            label_names,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    /// Values of feature `d` for every sample.
    pub fn column(&self, d: usize) -> &[f64] {
        &self.columns[d * self.n_samples..(d + 1) * self.n_samples]
    }

    #[inline]
    pub fn value(&self, i: usize, d: usize) -> f64 {
        self.columns[d * self.n_samples + i]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.n_features).map(|d| self.value(i, d)).collect()
    }

    /// Copy of the first `n` samples, keeping the label mapping.
    pub fn head(&self, n: usize) -> Dataset {
        self.select(&(0..n.min(self.n_samples)).collect::<Vec<_>>())
    }

    /// Copy of the given samples in the given order, keeping the label mapping.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let n = indices.len();
        let mut columns = Vec::with_capacity(n * self.n_features);
        for d in 0..self.n_features {
            let col = self.column(d);
            columns.extend(indices.iter().map(|&i| col[i]));
        }
        Dataset {
            n_samples: n,
            n_features: self.n_features,
            columns,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            label_names: self.label_names.clone(),
        }
    }
}

/// Reads a dataset file.
pub fn load_dataset(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(BufReader::new(file), path, opts)
}

/// Parses a dataset from any buffered reader; `source` is used in diagnostics.
pub fn read_dataset<R: BufRead>(reader: R, source: &Path, opts: &LoadOptions) -> Result<Dataset> {
    let malformed = |line: usize, message: String| Error::MalformedLine {
        path: source.to_path_buf(),
        line,
        message,
    };

    // (line number, label token, sparse (feature, value) pairs)
    let mut records: Vec<(usize, String, Vec<(usize, f64)>)> = Vec::new();
    let mut max_feature = 0usize;
    let mut csv_width: Option<usize> = None;
    let mut header_pending = opts.csv_header;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        match opts.format {
            DataFormat::Libsvm => {
                let text = text.split('#').next().unwrap_or("").trim();
                if text.is_empty() {
                    continue;
                }
                let mut tokens = text.split_whitespace();
                let label = tokens.next().unwrap_or_default().to_string();
                let mut entries = Vec::new();
                for tok in tokens {
                    let (idx, val) = tok
                        .split_once(':')
                        .ok_or_else(|| malformed(lineno, format!("expected idx:val, got `{tok}`")))?;
                    let idx: usize = idx
                        .parse()
                        .map_err(|_| malformed(lineno, format!("bad feature id in `{tok}`")))?;
                    if idx == 0 {
                        return Err(malformed(lineno, "feature ids are 1-based".into()));
                    }
                    let val: f64 = val
                        .parse()
                        .map_err(|_| malformed(lineno, format!("bad feature value in `{tok}`")))?;
                    if !val.is_finite() {
                        return Err(malformed(lineno, format!("non-finite feature value in `{tok}`")));
                    }
                    max_feature = max_feature.max(idx);
                    entries.push((idx - 1, val));
                }
                records.push((lineno, label, entries));
            }
            DataFormat::Csv => {
                if header_pending {
                    header_pending = false;
                    continue;
                }
                let cells: Vec<&str> = text.split(',').map(str::trim).collect();
                if cells.len() < 2 {
                    return Err(malformed(lineno, "need at least one feature and a label".into()));
                }
                match csv_width {
                    None => csv_width = Some(cells.len()),
                    Some(w) if w != cells.len() => {
                        return Err(malformed(
                            lineno,
                            format!("expected {w} columns, got {}", cells.len()),
                        ))
                    }
                    Some(_) => {}
                }
                let (label, feats) = cells.split_last().expect("at least two cells");
                let mut entries = Vec::with_capacity(feats.len());
                for (d, cell) in feats.iter().enumerate() {
                    let val: f64 = cell
                        .parse()
                        .map_err(|_| malformed(lineno, format!("bad numeric cell `{cell}` in column {}", d + 1)))?;
                    if !val.is_finite() {
                        return Err(malformed(lineno, format!("non-finite value in column {}", d + 1)));
                    }
                    entries.push((d, val));
                }
                max_feature = max_feature.max(feats.len());
                records.push((lineno, label.to_string(), entries));
            }
        }
    }

    if records.is_empty() {
        return Err(Error::EmptyFile(source.to_path_buf()));
    }

    let n_features = match opts.n_features {
        Some(d) if max_feature > d => {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: max_feature,
            })
        }
        Some(d) if opts.format == DataFormat::Csv && max_feature != d => {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: max_feature,
            })
        }
        Some(d) => d,
        None => max_feature,
    };
    if n_features == 0 {
        return Err(Error::InvalidDataset(format!(
            "{}: no feature values found",
            source.display()
        )));
    }

    let label_names = match &opts.label_map {
        Some(map) => map.clone(),
        None => sorted_label_tokens(records.iter().map(|r| r.1.as_str())),
    };

    let n = records.len();
    let mut columns = vec![0.0; n * n_features];
    let mut labels = Vec::with_capacity(n);
    for (i, (lineno, label, entries)) in records.into_iter().enumerate() {
        let class = label_names
            .iter()
            .position(|t| *t == label)
            .ok_or_else(|| Error::UnknownLabel {
                path: source.to_path_buf(),
                line: lineno,
                label: label.clone(),
            })?;
        labels.push(class);
        for (d, v) in entries {
            columns[d * n + i] = v;
        }
    }

    Dataset::from_columns(n, n_features, columns, labels, label_names)
}

/// Distinct tokens in class order: numeric order when every token is a
/// number, lexicographic otherwise.
pub fn sorted_label_tokens<'a>(tokens: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut distinct: Vec<String> = tokens.map(str::to_string).collect();
    distinct.sort();
    distinct.dedup();
    let numeric: Option<Vec<f64>> = distinct.iter().map(|t| t.parse::<f64>().ok()).collect();
    if let Some(values) = numeric {
        let mut paired: Vec<(f64, String)> = values.into_iter().zip(distinct).collect();
        paired.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        paired.into_iter().map(|(_, t)| t).collect()
    } else {
        distinct
    }
}

/// Per-feature ascending sample order with tie runs.
#[derive(Clone, Debug)]
pub struct FeatureColumnIndex {
    n_samples: usize,
    order: Vec<Vec<u32>>,
    ranks: Vec<Vec<u32>>,
    run_starts: Vec<Vec<u32>>,
}

impl FeatureColumnIndex {
    pub fn n_features(&self) -> usize {
        self.order.len()
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    /// Sample indices of feature `d` by ascending value, stable within ties.
    pub fn permutation(&self, d: usize) -> &[u32] {
        &self.order[d]
    }

    /// Dense rank of every sample's value of feature `d`; equal values share a rank.
    pub fn ranks(&self, d: usize) -> &[u32] {
        &self.ranks[d]
    }

    /// Positions in `permutation(d)` where a new run of equal values starts
    /// (position 0 excluded). These are the admissible split positions.
    pub fn run_boundaries(&self, d: usize) -> &[u32] {
        &self.run_starts[d]
    }
}

pub fn build_sorted_index(dataset: &Dataset) -> FeatureColumnIndex {
    let n = dataset.n_samples();
    let mut order = Vec::with_capacity(dataset.n_features());
    let mut ranks = Vec::with_capacity(dataset.n_features());
    let mut run_starts = Vec::with_capacity(dataset.n_features());
    for d in 0..dataset.n_features() {
        let col = dataset.column(d);
        let mut perm: Vec<u32> = (0..n as u32).collect();
        perm.sort_by(|&a, &b| {
            col[a as usize]
                .partial_cmp(&col[b as usize])
                .unwrap_or(Ordering::Equal)
        });
        let mut rank = vec![0u32; n];
        let mut starts = Vec::new();
        let mut current = 0u32;
        for pos in 0..n {
            let i = perm[pos] as usize;
            if pos > 0 && col[i] > col[perm[pos - 1] as usize] {
                current += 1;
                starts.push(pos as u32);
            }
            rank[i] = current;
        }
        order.push(perm);
        ranks.push(rank);
        run_starts.push(starts);
    }
    FeatureColumnIndex {
        n_samples: n,
        order,
        ranks,
        run_starts,
    }
}
