//! Feature/label CSV loading, training configuration, and the `nsmkl-v1`
//! model archive.
//!
//! Feature files are CSV, one file per view: a header row, first column
//! `sample_id`, remaining columns numeric features. Labels live in a separate
//! CSV (`sample_id,label[,instrument]`) with `label` one of `target` /
//! `nontarget`. A precomputed Gram file is a header-less n×n numeric grid.
//!
//! The model archive is a single self-describing JSON document with an
//! explicit `format` version tag; matrices are base64-encoded little-endian
//! f64 blocks so a save→load round trip reproduces scores bit-identically on
//! the same platform.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterModel;
use crate::kernels::KernelSpec;
use crate::model::TrainedModel;
use crate::solver::{DualVector, SolveTrace, WeightVector};
use crate::{Error, Result};

/// Version tag of the model archive format.
pub const ARCHIVE_FORMAT: &str = "nsmkl-v1";

/// Which norm constrains the kernel weights, and whether clusters share it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// One ℓ_{p,q} matrix-norm constraint over the concatenated weight vector.
    JointMatrix,
    /// One ℓ_p vector-norm constraint over the concatenated weight vector.
    JointVector,
    /// An ℓ_p vector-norm constraint per cluster block.
    DisjointVector,
    /// An ℓ_{p,q} matrix-norm constraint per cluster block.
    DisjointMatrix,
    /// Matrix-norm MKL on the raw kernels, no locality.
    NonLocalised,
    /// Single kernel, single cluster: the closed-form baseline.
    SingleKernel,
}

impl Regime {
    pub const ALL: [Regime; 6] = [
        Regime::JointMatrix,
        Regime::JointVector,
        Regime::DisjointVector,
        Regime::DisjointMatrix,
        Regime::NonLocalised,
        Regime::SingleKernel,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::JointMatrix => "joint-matrix",
            Regime::JointVector => "joint-vector",
            Regime::DisjointVector => "disjoint-vector",
            Regime::DisjointMatrix => "disjoint-matrix",
            Regime::NonLocalised => "non-localised",
            Regime::SingleKernel => "single-kernel",
        }
    }

    /// True when the regime ignores clustering and works on raw kernels.
    pub fn is_global(&self) -> bool {
        matches!(self, Regime::NonLocalised | Regime::SingleKernel)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidParam(format!(
                    "unknown regime {s:?}; expected one of {}",
                    Regime::ALL.map(|r| r.as_str()).join(", ")
                ))
            })
    }
}

/// Training configuration.
///
/// `delta` is the Tikhonov regulariser δ on the dual problem; callers that
/// think in terms of the primal trade-off θ can use [`MklConfig::from_theta`]
/// (δ = n/θ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MklConfig {
    pub p: f64,
    pub q: f64,
    pub delta: f64,
    #[serde(default = "default_clusters")]
    pub clusters: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_weight_floor")]
    pub weight_floor: f64,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "default_regime")]
    pub regime: Regime,
    /// Softmax temperature for cluster memberships; `None` picks the
    /// scale-adaptive default (mean squared distance to the nearest cluster).
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default = "default_restarts")]
    pub kmeans_restarts: usize,
}

fn default_clusters() -> usize {
    3
}
fn default_max_iter() -> usize {
    200
}
fn default_tol() -> f64 {
    1e-6
}
fn default_weight_floor() -> f64 {
    1e-12
}
fn default_regime() -> Regime {
    Regime::JointMatrix
}
fn default_restarts() -> usize {
    8
}

impl MklConfig {
    pub fn new(p: f64, q: f64, delta: f64) -> Self {
        Self {
            p,
            q,
            delta,
            clusters: default_clusters(),
            max_iter: default_max_iter(),
            tol: default_tol(),
            weight_floor: default_weight_floor(),
            rng_seed: 0,
            regime: default_regime(),
            temperature: None,
            kmeans_restarts: default_restarts(),
        }
    }

    /// δ = n/θ.
    pub fn from_theta(p: f64, q: f64, theta: f64, n: usize) -> Result<Self> {
        if theta <= 0.0 || !theta.is_finite() {
            return Err(Error::InvalidParam(format!("theta must be > 0, got {theta}")));
        }
        Ok(Self::new(p, q, n as f64 / theta))
    }

    pub fn validate(&self) -> Result<()> {
        if self.p < 1.0 || !self.p.is_finite() {
            return Err(Error::InvalidParam(format!("p must be ≥ 1, got {}", self.p)));
        }
        if self.q < 1.0 || !self.q.is_finite() {
            return Err(Error::InvalidParam(format!("q must be ≥ 1, got {}", self.q)));
        }
        if self.delta <= 0.0 || !self.delta.is_finite() {
            return Err(Error::InvalidParam(format!(
                "delta must be > 0, got {}",
                self.delta
            )));
        }
        if self.clusters < 1 {
            return Err(Error::InvalidParam("clusters must be ≥ 1".into()));
        }
        if self.tol <= 0.0 || !self.tol.is_finite() {
            return Err(Error::InvalidParam(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.weight_floor <= 0.0 {
            return Err(Error::InvalidParam("weight_floor must be > 0".into()));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidParam("max_iter must be ≥ 1".into()));
        }
        if self.kmeans_restarts < 1 {
            return Err(Error::InvalidParam("kmeans_restarts must be ≥ 1".into()));
        }
        if let Some(t) = self.temperature {
            if t <= 0.0 || !t.is_finite() {
                return Err(Error::InvalidParam(format!(
                    "temperature must be > 0, got {t}"
                )));
            }
        }
        Ok(())
    }
}

/// Per-sample evaluation label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub target: bool,
    /// Attack-instrument tag on non-target samples (used by APCER/ACER).
    pub instrument: Option<String>,
}

/// n samples described by G feature views (each n×d_g), identified by unique
/// sample ids, optionally labelled.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    pub views: Vec<Array2<f64>>,
    pub sample_ids: Vec<String>,
    pub labels: Option<Vec<Label>>,
}

impl FeatureDataset {
    pub fn n(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn view_count(&self) -> usize {
        self.views.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_ids.is_empty() {
            return Err(Error::InvalidParam("dataset has no samples".into()));
        }
        if self.views.is_empty() {
            return Err(Error::InvalidParam("dataset has no views".into()));
        }
        let n = self.sample_ids.len();
        let row_counts: Vec<usize> = self.views.iter().map(|v| v.nrows()).collect();
        if row_counts.iter().any(|&r| r != n) {
            return Err(Error::RowCountMismatch(row_counts));
        }
        for view in &self.views {
            if view.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParam("non-finite feature value".into()));
            }
        }
        let mut seen = HashMap::with_capacity(n);
        for id in &self.sample_ids {
            if seen.insert(id.as_str(), ()).is_some() {
                return Err(Error::DuplicateSampleId(id.clone()));
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {n} samples",
                    labels.len()
                )));
            }
        }
        Ok(())
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, err: csv::Error) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        message: err.to_string(),
    }
}

/// Reads one feature view: header row, `sample_id` column, numeric features.
fn load_view(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut ids = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let mut fields = record.iter();
        let id = fields
            .next()
            .ok_or_else(|| Error::Csv {
                path: path.display().to_string(),
                message: format!("row {row_idx} is empty"),
            })?
            .to_string();
        let mut row = Vec::with_capacity(record.len().saturating_sub(1));
        for (col_idx, cell) in fields.enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| Error::NonNumericCell {
                path: path.display().to_string(),
                row: row_idx,
                column: col_idx + 1,
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonNumericCell {
                    path: path.display().to_string(),
                    row: row_idx,
                    column: col_idx + 1,
                    value: cell.to_string(),
                });
            }
            row.push(value);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Csv {
                    path: path.display().to_string(),
                    message: format!("row {row_idx} has {} cells, expected {w}", row.len()),
                })
            }
            _ => {}
        }
        ids.push(id);
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Csv {
            path: path.display().to_string(),
            message: "no data rows".into(),
        });
    }
    let d = width.unwrap_or(0);
    let mut matrix = Array2::<f64>::zeros((rows.len(), d));
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            matrix[(i, j)] = *v;
        }
    }
    Ok((ids, matrix))
}

/// Loads a labels CSV keyed by sample id: `sample_id,label[,instrument]`.
pub fn load_labels(path: &Path) -> Result<HashMap<String, Label>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut labels = HashMap::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let id = record.get(0).unwrap_or("").to_string();
        let raw = record.get(1).unwrap_or("").trim().to_ascii_lowercase();
        let target = match raw.as_str() {
            "target" => true,
            "nontarget" => false,
            other => {
                return Err(Error::Csv {
                    path: path.display().to_string(),
                    message: format!(
                        "row {row_idx}: label must be target or nontarget, got {other:?}"
                    ),
                })
            }
        };
        let instrument = record
            .get(2)
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(|s| s.to_string());
        if labels
            .insert(id.clone(), Label { target, instrument })
            .is_some()
        {
            return Err(Error::DuplicateSampleId(id));
        }
    }
    Ok(labels)
}

/// Loads a dataset from one CSV per view plus an optional labels CSV.
///
/// All views must list the same sample ids in the same order; the labels file
/// must cover every id (extra label rows are ignored).
pub fn load_dataset(view_paths: &[impl AsRef<Path>], labels_path: Option<&Path>) -> Result<FeatureDataset> {
    if view_paths.is_empty() {
        return Err(Error::InvalidParam("no view files given".into()));
    }
    let mut ids: Option<Vec<String>> = None;
    let mut views = Vec::with_capacity(view_paths.len());
    let mut row_counts = Vec::with_capacity(view_paths.len());
    for path in view_paths {
        let (view_ids, matrix) = load_view(path.as_ref())?;
        row_counts.push(matrix.nrows());
        match &ids {
            None => ids = Some(view_ids),
            Some(first) => {
                if first.len() != view_ids.len() {
                    return Err(Error::RowCountMismatch(row_counts));
                }
                if let Some(row) = first.iter().zip(&view_ids).position(|(a, b)| a != b) {
                    return Err(Error::SampleIdMismatch {
                        row,
                        left: first[row].clone(),
                        right: view_ids[row].clone(),
                    });
                }
            }
        }
        views.push(matrix);
    }
    let sample_ids = ids.expect("at least one view");
    let labels = match labels_path {
        None => None,
        Some(path) => {
            let map = load_labels(path)?;
            let mut ordered = Vec::with_capacity(sample_ids.len());
            for id in &sample_ids {
                let label = map.get(id).cloned().ok_or_else(|| Error::Csv {
                    path: path.display().to_string(),
                    message: format!("no label for sample id {id:?}"),
                })?;
                ordered.push(label);
            }
            Some(ordered)
        }
    };
    let dataset = FeatureDataset {
        views,
        sample_ids,
        labels,
    };
    dataset.validate()?;
    Ok(dataset)
}

/// Loads a header-less n×n numeric Gram CSV.
pub fn load_gram_csv(path: &Path) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let mut row = Vec::with_capacity(record.len());
        for (col_idx, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| Error::NonNumericCell {
                path: path.display().to_string(),
                row: row_idx,
                column: col_idx,
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonNumericCell {
                    path: path.display().to_string(),
                    row: row_idx,
                    column: col_idx,
                    value: cell.to_string(),
                });
            }
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Csv {
            path: path.display().to_string(),
            message: "no data rows".into(),
        });
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Csv {
            path: path.display().to_string(),
            message: "ragged rows".into(),
        });
    }
    let mut matrix = Array2::<f64>::zeros((rows.len(), cols));
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            matrix[(i, j)] = *v;
        }
    }
    Ok(matrix)
}

/// Writes a scores CSV (`sample_id,score`) with round-trip-exact floats.
pub fn write_scores_csv(path: &Path, ids: &[String], scores: &[f64]) -> Result<()> {
    if ids.len() != scores.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} ids for {} scores",
            ids.len(),
            scores.len()
        )));
    }
    let mut out = String::from("sample_id,score\n");
    for (id, score) in ids.iter().zip(scores) {
        out.push_str(id);
        out.push(',');
        out.push_str(&format!("{score}"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Writes one feature view as CSV (`sample_id,f0,...`) with round-trip-exact
/// floats.
pub fn write_view_csv(path: &Path, ids: &[String], view: &Array2<f64>) -> Result<()> {
    if ids.len() != view.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} ids for {} rows",
            ids.len(),
            view.nrows()
        )));
    }
    let mut out = String::from("sample_id");
    for j in 0..view.ncols() {
        out.push_str(&format!(",f{j}"));
    }
    out.push('\n');
    for (i, id) in ids.iter().enumerate() {
        out.push_str(id);
        for j in 0..view.ncols() {
            out.push(',');
            out.push_str(&format!("{}", view[(i, j)]));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Writes a labels CSV (`sample_id,label,instrument`).
pub fn write_labels_csv(path: &Path, ids: &[String], labels: &[Label]) -> Result<()> {
    if ids.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} ids for {} labels",
            ids.len(),
            labels.len()
        )));
    }
    let mut out = String::from("sample_id,label,instrument\n");
    for (id, label) in ids.iter().zip(labels) {
        out.push_str(id);
        out.push(',');
        out.push_str(if label.target { "target" } else { "nontarget" });
        out.push(',');
        if let Some(tag) = &label.instrument {
            out.push_str(tag);
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Reads a scores CSV back into (ids, scores).
pub fn read_scores_csv(path: &Path) -> Result<(Vec<String>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut ids = Vec::new();
    let mut scores = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        ids.push(record.get(0).unwrap_or("").to_string());
        let cell = record.get(1).unwrap_or("");
        let value: f64 = cell.trim().parse().map_err(|_| Error::NonNumericCell {
            path: path.display().to_string(),
            row: row_idx,
            column: 1,
            value: cell.to_string(),
        })?;
        scores.push(value);
    }
    Ok((ids, scores))
}

// ---------------------------------------------------------------------------
// Model archive
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct MatrixBlob {
    rows: usize,
    cols: usize,
    data: String,
}

impl MatrixBlob {
    fn encode(m: &Array2<f64>) -> Self {
        let mut bytes = Vec::with_capacity(m.len() * 8);
        for v in m.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: BASE64.encode(bytes),
        }
    }

    fn decode(&self, path: &Path) -> Result<Array2<f64>> {
        let bytes = BASE64.decode(&self.data).map_err(|e| Error::Archive {
            path: path.display().to_string(),
            message: format!("bad base64 block: {e}"),
        })?;
        if bytes.len() != self.rows * self.cols * 8 {
            return Err(Error::Archive {
                path: path.display().to_string(),
                message: format!(
                    "matrix block is {} bytes, expected {}",
                    bytes.len(),
                    self.rows * self.cols * 8
                ),
            });
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Array2::from_shape_vec((self.rows, self.cols), values).map_err(|e| Error::Archive {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

fn encode_vector(v: &Array1<f64>) -> MatrixBlob {
    let m = v.view().insert_axis(ndarray::Axis(0)).to_owned();
    MatrixBlob::encode(&m)
}

fn decode_vector(blob: &MatrixBlob, path: &Path) -> Result<Array1<f64>> {
    let m = blob.decode(path)?;
    Ok(m.into_shape_with_order(blob.rows * blob.cols)
        .expect("row vector reshape"))
}

#[derive(Serialize, Deserialize)]
struct ArchiveDoc {
    format: String,
    config: MklConfig,
    kernel_specs: Vec<KernelSpec>,
    sample_ids: Vec<String>,
    train_views: Vec<MatrixBlob>,
    train_grams: Option<Vec<MatrixBlob>>,
    memberships: MatrixBlob,
    cluster: ClusterModel,
    mu_clusters: usize,
    mu_kernels: usize,
    mu: MatrixBlob,
    lambda: MatrixBlob,
    trace: SolveTrace,
}

/// Persists a trained model under the `nsmkl-v1` format.
pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    let doc = ArchiveDoc {
        format: ARCHIVE_FORMAT.to_string(),
        config: model.config.clone(),
        kernel_specs: model.kernel_specs.clone(),
        sample_ids: model.sample_ids.clone(),
        train_views: model.train_views.iter().map(MatrixBlob::encode).collect(),
        train_grams: model
            .train_grams
            .as_ref()
            .map(|grams| grams.iter().map(MatrixBlob::encode).collect()),
        memberships: MatrixBlob::encode(&model.memberships),
        cluster: model.cluster.clone(),
        mu_clusters: model.mu.cluster_count(),
        mu_kernels: model.mu.kernels_per_cluster(),
        mu: encode_vector(model.mu.values()),
        lambda: encode_vector(model.lambda.values()),
        trace: model.trace.clone(),
    };
    let json = serde_json::to_string_pretty(&doc).map_err(|e| Error::Archive {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    std::fs::write(path, json).map_err(|e| io_err(path, e))
}

/// Loads a model archive, rejecting unknown format versions.
pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let raw = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    // Peek the version tag first so a format bump reports as such rather than
    // as a field-level parse error.
    let head: serde_json::Value = serde_json::from_str(&raw).map_err(|e| Error::Archive {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let found = head
        .get("format")
        .and_then(|v| v.as_str())
        .unwrap_or("<missing>")
        .to_string();
    if found != ARCHIVE_FORMAT {
        return Err(Error::VersionMismatch {
            found,
            expected: ARCHIVE_FORMAT.to_string(),
        });
    }
    let doc: ArchiveDoc = serde_json::from_value(head).map_err(|e| Error::Archive {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut train_views = Vec::with_capacity(doc.train_views.len());
    for blob in &doc.train_views {
        train_views.push(blob.decode(path)?);
    }
    let train_grams = match &doc.train_grams {
        None => None,
        Some(blobs) => {
            let mut grams = Vec::with_capacity(blobs.len());
            for blob in blobs {
                grams.push(blob.decode(path)?);
            }
            Some(grams)
        }
    };
    let mu = WeightVector::new(decode_vector(&doc.mu, path)?, doc.mu_clusters, doc.mu_kernels)?;
    let lambda = DualVector::new(decode_vector(&doc.lambda, path)?);
    let model = TrainedModel {
        config: doc.config,
        kernel_specs: doc.kernel_specs,
        sample_ids: doc.sample_ids,
        train_views,
        train_grams,
        memberships: doc.memberships.decode(path)?,
        cluster: doc.cluster,
        mu,
        lambda,
        trace: doc.trace,
    };
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &tempfile::TempDir, name: &str, contents: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    #[test]
    fn loads_two_views_with_labels() {
        let dir = tempfile::tempdir().unwrap();
        let v0 = write_file(
            &dir,
            "v0.csv",
            "sample_id,f0,f1\na,0.0,1.0\nb,1.0,0.0\nc,2.0,2.0\nd,3.0,1.0\ne,4.0,0.5\n",
        );
        let v1 = write_file(
            &dir,
            "v1.csv",
            "sample_id,g0\na,0.5\nb,1.5\nc,2.5\nd,3.5\ne,4.5\n",
        );
        let labels = write_file(
            &dir,
            "labels.csv",
            "sample_id,label,instrument\na,target,\nb,target,\nc,nontarget,print\nd,nontarget,replay\ne,target,\n",
        );
        let ds = load_dataset(&[&v0, &v1], Some(&labels)).unwrap();
        assert_eq!(ds.n(), 5);
        assert_eq!(ds.view_count(), 2);
        assert_eq!(ds.views[0].ncols(), 2);
        assert_eq!(ds.views[1].ncols(), 1);
        let labels = ds.labels.unwrap();
        assert!(labels[0].target);
        assert_eq!(labels[2].instrument.as_deref(), Some("print"));
    }

    #[test]
    fn row_count_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let v0 = write_file(&dir, "v0.csv", "sample_id,f0\na,0\nb,1\nc,2\nd,3\ne,4\n");
        let v1 = write_file(&dir, "v1.csv", "sample_id,f0\na,0\nb,1\nc,2\nd,3\n");
        assert!(matches!(
            load_dataset(&[&v0, &v1], None),
            Err(Error::RowCountMismatch(_))
        ));
    }

    #[test]
    fn nan_cell_is_a_non_numeric_error() {
        let dir = tempfile::tempdir().unwrap();
        let v0 = write_file(&dir, "v0.csv", "sample_id,f0\na,0.0\nb,NaN\n");
        assert!(matches!(
            load_dataset(&[&v0], None),
            Err(Error::NonNumericCell { .. })
        ));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let v0 = write_file(&dir, "v0.csv", "sample_id,f0\na,0.0\na,1.0\n");
        assert!(matches!(
            load_dataset(&[&v0], None),
            Err(Error::DuplicateSampleId(_))
        ));
    }

    #[test]
    fn id_order_mismatch_across_views_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let v0 = write_file(&dir, "v0.csv", "sample_id,f0\na,0.0\nb,1.0\n");
        let v1 = write_file(&dir, "v1.csv", "sample_id,f0\nb,0.0\na,1.0\n");
        assert!(matches!(
            load_dataset(&[&v0, &v1], None),
            Err(Error::SampleIdMismatch { .. })
        ));
    }

    #[test]
    fn missing_file_reports_csv_error() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.csv");
        assert!(load_dataset(&[&missing], None).is_err());
    }

    #[test]
    fn load_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let v0 = write_file(&dir, "v0.csv", "sample_id,f0,f1\na,0.25,1.5\nb,1.0,-0.75\n");
        let first = load_dataset(&[&v0], None).unwrap();
        let second = load_dataset(&[&v0], None).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn config_validation_catches_bad_fields() {
        let mut cfg = MklConfig::new(2.0, 2.0, 1.0);
        cfg.validate().unwrap();
        cfg.p = 0.5;
        assert!(cfg.validate().is_err());
        cfg.p = 2.0;
        cfg.delta = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn theta_converts_to_delta() {
        let cfg = MklConfig::from_theta(2.0, 2.0, 4.0, 8).unwrap();
        assert!((cfg.delta - 2.0).abs() < 1e-15);
    }

    #[test]
    fn regime_round_trips_through_strings() {
        for regime in Regime::ALL {
            assert_eq!(regime.as_str().parse::<Regime>().unwrap(), regime);
        }
        assert!("banana".parse::<Regime>().is_err());
    }

    #[test]
    fn scores_csv_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        let ids = vec!["a".to_string(), "b".to_string()];
        let scores = vec![0.123_456_789_012_345_68, -1.0e-17];
        write_scores_csv(&path, &ids, &scores).unwrap();
        let (rids, rscores) = read_scores_csv(&path).unwrap();
        assert_eq!(rids, ids);
        assert_eq!(rscores[0].to_bits(), scores[0].to_bits());
        assert_eq!(rscores[1].to_bits(), scores[1].to_bits());
    }
}
