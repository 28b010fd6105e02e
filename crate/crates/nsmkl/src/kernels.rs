//! Kernel functions, Gram matrices, localised per-cluster kernel stacks, and
//! the ℓ_p / ℓ_{p,q} norm machinery used by the trainer.

use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayViewMut2, Axis};
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::{Error, Result};

/// Symmetry tolerance for square training Grams.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// A training Gram passes PSD validation when its smallest eigenvalue is at
/// least `-PSD_TOL` times its largest.
pub const PSD_TOL: f64 = 1e-8;
/// Membership rows must sum to one within this tolerance.
pub const MEMBERSHIP_ROW_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rbf,
    Linear,
    Precomputed,
}

/// One base kernel, bound to a feature view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// RBF width σ; unused for linear and precomputed kernels.
    pub width: Option<f64>,
    pub view_index: usize,
}

impl KernelSpec {
    pub fn rbf(view_index: usize, width: f64) -> Self {
        Self {
            kind: KernelKind::Rbf,
            width: Some(width),
            view_index,
        }
    }

    pub fn linear(view_index: usize) -> Self {
        Self {
            kind: KernelKind::Linear,
            width: None,
            view_index,
        }
    }

    pub fn precomputed(view_index: usize) -> Self {
        Self {
            kind: KernelKind::Precomputed,
            width: None,
            view_index,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == KernelKind::Rbf {
            match self.width {
                Some(w) if w > 0.0 && w.is_finite() => {}
                other => {
                    return Err(Error::InvalidParam(format!(
                        "rbf kernel needs width > 0, got {other:?}"
                    )))
                }
            }
        }
        Ok(())
    }
}

/// A kernel matrix: n×m cross Gram, or square n×n training Gram.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub values: Array2<f64>,
    pub spec: KernelSpec,
}

impl GramMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Checks the square-training-Gram contract: symmetry within 1e-12,
    /// positive semi-definiteness (smallest eigenvalue ≥ −1e-8·largest), and
    /// unit diagonal for RBF kernels.
    pub fn validate_training(&self) -> Result<()> {
        let n = self.values.nrows();
        if self.values.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "training gram must be square, got {}x{}",
                n,
                self.values.ncols()
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let d = (self.values[(i, j)] - self.values[(j, i)]).abs();
                if d > SYMMETRY_TOL {
                    return Err(Error::NotPositiveSemiDefinite(format!(
                        "asymmetry {d:.3e} at ({i},{j})"
                    )));
                }
            }
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveSemiDefinite("non-finite entry".into()));
        }
        let eigs = linalg::symmetric_eigenvalues(&self.values)?;
        let largest = eigs.last().copied().unwrap_or(0.0).max(0.0);
        let smallest = eigs.first().copied().unwrap_or(0.0);
        if smallest < -PSD_TOL * largest.max(1e-300) {
            return Err(Error::NotPositiveSemiDefinite(format!(
                "smallest eigenvalue {smallest:.3e} vs largest {largest:.3e}"
            )));
        }
        if self.spec.kind == KernelKind::Rbf {
            for i in 0..n {
                if (self.values[(i, i)] - 1.0).abs() > 1e-12 {
                    return Err(Error::NotPositiveSemiDefinite(format!(
                        "rbf diagonal entry {} at {i}",
                        self.values[(i, i)]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// RBF width rule: half the mean Euclidean distance over unordered distinct
/// pairs of rows. Self-pairs are excluded so the width is not biased toward 0.
pub fn rbf_width(view: &Array2<f64>) -> Result<f64> {
    let n = view.nrows();
    if n < 2 {
        return Err(Error::InvalidParam(format!(
            "rbf width needs at least 2 samples, got {n}"
        )));
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            total += row_distance_sq(view, i, view, j).sqrt();
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let width = 0.5 * total / pairs;
    if width <= 0.0 {
        return Err(Error::DegenerateWidth);
    }
    Ok(width)
}

fn row_distance_sq(a: &Array2<f64>, i: usize, b: &Array2<f64>, j: usize) -> f64 {
    let ra = a.row(i);
    let rb = b.row(j);
    ra.iter()
        .zip(rb.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Thread cap for Gram construction: `NSMKL_THREADS` if set, otherwise the
/// available parallelism (capped at 8). Read once per process.
pub(crate) fn thread_cap() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| {
        if let Ok(raw) = std::env::var("NSMKL_THREADS") {
            if let Ok(t) = raw.trim().parse::<usize>() {
                if t >= 1 {
                    return t;
                }
            }
            return 1;
        }
        std::thread::available_parallelism()
            .map(|t| t.get().min(8))
            .unwrap_or(1)
    })
}

/// Gram matrix values\[i,j\] = κ(a_i, b_j).
///
/// Rows are filled in disjoint chunks, possibly on several threads; every
/// entry is computed independently so the result does not depend on the
/// thread count.
pub fn gram(view_a: &Array2<f64>, view_b: &Array2<f64>, spec: &KernelSpec) -> Result<GramMatrix> {
    spec.validate()?;
    if spec.kind == KernelKind::Precomputed {
        return Err(Error::InvalidParam(
            "precomputed kernels carry their own gram; nothing to evaluate".into(),
        ));
    }
    if view_a.ncols() != view_b.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "feature dimension mismatch: {} vs {}",
            view_a.ncols(),
            view_b.ncols()
        )));
    }
    let na = view_a.nrows();
    let mut values = Array2::<f64>::zeros((na, view_b.nrows()));

    let threads = thread_cap().min(na.max(1));
    let fill = |offset: usize, mut chunk: ArrayViewMut2<f64>| {
        for (local, mut row) in chunk.rows_mut().into_iter().enumerate() {
            let i = offset + local;
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = kernel_value(view_a, i, view_b, j, spec);
            }
        }
    };
    if threads <= 1 || na < 2 * threads {
        fill(0, values.view_mut());
    } else {
        let chunk_rows = na.div_ceil(threads);
        std::thread::scope(|scope| {
            for (idx, chunk) in values
                .axis_chunks_iter_mut(Axis(0), chunk_rows)
                .enumerate()
            {
                scope.spawn(move || fill(idx * chunk_rows, chunk));
            }
        });
    }

    Ok(GramMatrix {
        values,
        spec: spec.clone(),
    })
}

fn kernel_value(a: &Array2<f64>, i: usize, b: &Array2<f64>, j: usize, spec: &KernelSpec) -> f64 {
    match spec.kind {
        KernelKind::Rbf => {
            let width = spec.width.expect("validated width");
            (-row_distance_sq(a, i, b, j) / (2.0 * width * width)).exp()
        }
        KernelKind::Linear => a.row(i).dot(&b.row(j)),
        KernelKind::Precomputed => unreachable!("rejected by gram()"),
    }
}

/// Wraps an externally supplied square Gram after symmetry/PSD validation.
pub fn precomputed_gram(values: Array2<f64>, view_index: usize) -> Result<GramMatrix> {
    let gram = GramMatrix {
        values,
        spec: KernelSpec::precomputed(view_index),
    };
    gram.validate_training()?;
    Ok(gram)
}

/// Uniform average of G training Grams; drives clustering when G > 1.
pub fn average_gram(grams: &[GramMatrix]) -> Result<Array2<f64>> {
    if grams.is_empty() {
        return Err(Error::InvalidParam("no gram matrices to average".into()));
    }
    let n = grams[0].values.nrows();
    let mut avg = Array2::<f64>::zeros((n, grams[0].values.ncols()));
    for g in grams {
        if g.values.shape() != avg.shape() {
            return Err(Error::DimensionMismatch(
                "gram shapes differ across views".into(),
            ));
        }
        avg += &g.values;
    }
    avg /= grams.len() as f64;
    Ok(avg)
}

/// ℓ_p norm of a nonnegative vector, p ≥ 1. Scaled by the max entry so large
/// p does not overflow.
pub fn lp_norm(v: &Array1<f64>, p: f64) -> Result<f64> {
    check_norm_input(v, p)?;
    let m = v.iter().fold(0.0f64, |acc, &x| acc.max(x));
    if m == 0.0 {
        return Ok(0.0);
    }
    let sum: f64 = v.iter().map(|&x| (x / m).powf(p)).sum();
    Ok(m * sum.powf(1.0 / p))
}

/// ℓ_{p,q} matrix norm of the outer product vvᵀ, which factors as
/// ‖v‖_p·‖v‖_q. Setting p=q recovers the squared vector norm.
pub fn lpq_matrix_norm_of_outer(v: &Array1<f64>, p: f64, q: f64) -> Result<f64> {
    Ok(lp_norm(v, p)? * lp_norm(v, q)?)
}

fn check_norm_input(v: &Array1<f64>, p: f64) -> Result<()> {
    if p < 1.0 || !p.is_finite() {
        return Err(Error::InvalidParam(format!("norm exponent must be ≥ 1, got {p}")));
    }
    if let Some(x) = v.iter().find(|x| **x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "norm input must be nonnegative and finite, got {x}"
        )));
    }
    Ok(())
}

/// The C·G membership-scaled kernel matrices
/// K_cg\[i,j\] = p_c(x_i)·κ_g(x_i,x_j)·p_c(x_j), stored cluster-major, together
/// with the memberships that produced them.
#[derive(Debug, Clone)]
pub struct LocalisedKernelStack {
    matrices: Vec<Array2<f64>>,
    memberships: Array2<f64>,
    cluster_count: usize,
    kernel_count: usize,
}

impl LocalisedKernelStack {
    pub fn cluster_count(&self) -> usize {
        self.cluster_count
    }

    pub fn kernel_count(&self) -> usize {
        self.kernel_count
    }

    /// Number of (cluster, kernel) pairs; the length of the weight vector.
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    pub fn n(&self) -> usize {
        self.memberships.nrows()
    }

    pub fn memberships(&self) -> &Array2<f64> {
        &self.memberships
    }

    /// K_cg in cluster-major order, matching the weight-vector blocking.
    pub fn matrix(&self, cluster: usize, kernel: usize) -> &Array2<f64> {
        &self.matrices[cluster * self.kernel_count + kernel]
    }

    pub fn matrix_at(&self, flat: usize) -> &Array2<f64> {
        &self.matrices[flat]
    }

    /// δI + Σ_cg μ_cg K_cg.
    pub fn regularised_combination(&self, weights: &Array1<f64>, delta: f64) -> Result<Array2<f64>> {
        if weights.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for a stack of {} matrices",
                weights.len(),
                self.len()
            )));
        }
        let n = self.n();
        let mut combined = Array2::<f64>::eye(n) * delta;
        for (w, k) in weights.iter().zip(&self.matrices) {
            if *w != 0.0 {
                combined.scaled_add(*w, k);
            }
        }
        Ok(combined)
    }
}

/// Builds the localised stack from G training Grams and an n×C membership
/// matrix. Membership rows must sum to one within 1e-9 with entries in \[0,1\].
pub fn build_localised_stack(
    grams: &[GramMatrix],
    memberships: &Array2<f64>,
) -> Result<LocalisedKernelStack> {
    if grams.is_empty() {
        return Err(Error::InvalidParam("stack needs at least one kernel".into()));
    }
    let n = memberships.nrows();
    let c = memberships.ncols();
    if c == 0 || n == 0 {
        return Err(Error::InvalidMemberships("empty membership matrix".into()));
    }
    for g in grams {
        if g.values.nrows() != n || g.values.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "gram is {}x{} but memberships have {n} rows",
                g.values.nrows(),
                g.values.ncols()
            )));
        }
    }
    validate_membership_rows(memberships)?;

    let mut matrices = Vec::with_capacity(c * grams.len());
    for cluster in 0..c {
        let weights = memberships.column(cluster);
        for g in grams {
            let mut scaled = g.values.clone();
            for i in 0..n {
                let wi = weights[i];
                for j in 0..n {
                    scaled[(i, j)] *= wi * weights[j];
                }
            }
            matrices.push(scaled);
        }
    }
    Ok(LocalisedKernelStack {
        matrices,
        memberships: memberships.clone(),
        cluster_count: c,
        kernel_count: grams.len(),
    })
}

pub(crate) fn validate_membership_rows(memberships: &Array2<f64>) -> Result<()> {
    for (i, row) in memberships.rows().into_iter().enumerate() {
        let mut sum = 0.0;
        for &v in row.iter() {
            if !(-1e-12..=1.0 + 1e-12).contains(&v) || !v.is_finite() {
                return Err(Error::InvalidMemberships(format!(
                    "entry {v} out of [0,1] at row {i}"
                )));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > MEMBERSHIP_ROW_TOL {
            return Err(Error::InvalidMemberships(format!(
                "row {i} sums to {sum}, expected 1"
            )));
        }
    }
    Ok(())
}
