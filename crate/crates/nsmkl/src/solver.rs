//! Trainer for the localised multiple-kernel Fisher null-space model.
//!
//! The saddle problem
//!
//! ```text
//! min_μ max_λ  −λᵀ(Σ_cg μ_cg K_cg)λ − δ·λᵀλ + 2·λᵀ1
//!   s.t. μ ≥ 0 and a norm constraint on μ
//! ```
//!
//! is solved by alternating a closed-form μ update with a regularised
//! symmetric positive-definite solve for λ until λ reaches a fixed point.
//! The norm constraint depends on the regime: one ℓ_{p,q} matrix norm or
//! ℓ_p vector norm over the whole weight vector (joint), or one per cluster
//! block (disjoint).

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::dataio::{MklConfig, Regime};
use crate::kernels::{lp_norm, LocalisedKernelStack};
use crate::linalg::{quadratic_form, Cholesky};
use crate::{Error, Result};

/// Residual contract for the regularised linear solve.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Nonnegative kernel weights, blocked cluster-major: block c holds the G
/// weights of cluster c.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    values: Array1<f64>,
    cluster_count: usize,
    kernels_per_cluster: usize,
}

impl WeightVector {
    pub fn new(values: Array1<f64>, cluster_count: usize, kernels_per_cluster: usize) -> Result<Self> {
        if values.len() != cluster_count * kernels_per_cluster {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {cluster_count}x{kernels_per_cluster} blocking",
                values.len()
            )));
        }
        Ok(Self {
            values,
            cluster_count,
            kernels_per_cluster,
        })
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn cluster_count(&self) -> usize {
        self.cluster_count
    }

    pub fn kernels_per_cluster(&self) -> usize {
        self.kernels_per_cluster
    }

    /// Weight μ_cg.
    pub fn weight(&self, cluster: usize, kernel: usize) -> f64 {
        self.values[cluster * self.kernels_per_cluster + kernel]
    }

    /// The G weights of one cluster.
    pub fn block(&self, cluster: usize) -> ArrayView1<'_, f64> {
        let g = self.kernels_per_cluster;
        self.values.slice(ndarray::s![cluster * g..(cluster + 1) * g])
    }
}

/// Dual solution λ of the regularised system (δI + Σ_cg μ_cg K_cg)λ = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVector {
    values: Array1<f64>,
}

impl DualVector {
    pub fn new(values: Array1<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Per-iteration record of the alternating trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub iterations: usize,
    pub converged: bool,
    /// Relative ∞-norm change of λ after each iteration.
    pub lambda_changes: Vec<f64>,
    /// Saddle objective after each iteration.
    pub objectives: Vec<f64>,
}

/// Result of a training run. On non-convergence the last iterate is returned
/// and `trace.converged` is false; the caller decides whether that is fatal.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub mu: WeightVector,
    pub lambda: DualVector,
    pub trace: SolveTrace,
}

/// u_{cg} = λᵀ K_cg λ in cluster-major order. Nonnegative for PSD stacks.
pub fn compute_u(stack: &LocalisedKernelStack, lambda: &DualVector) -> Result<Array1<f64>> {
    if lambda.len() != stack.n() {
        return Err(Error::DimensionMismatch(format!(
            "λ has {} entries for {} training points",
            lambda.len(),
            stack.n()
        )));
    }
    let mut u = Array1::<f64>::zeros(stack.len());
    for flat in 0..stack.len() {
        u[flat] = quadratic_form(stack.matrix_at(flat), lambda.values()).max(0.0);
    }
    Ok(u)
}

fn clamp_floor(mu: &Array1<f64>, floor: f64) -> Array1<f64> {
    mu.mapv(|v| v.max(floor))
}

/// Closed-form weight update under the joint matrix-norm constraint:
/// ū = u ⊘ (μ^{p−2}/‖μ‖_p^p + μ^{q−2}/‖μ‖_q^q), μ⁺ = ū/√(‖ū‖_p‖ū‖_q).
///
/// The previous weights are floored before the (possibly negative) powers are
/// taken, which preserves the fixed point to roundoff while keeping the
/// update defined for p, q < 2 at zero weights.
pub fn mu_update(
    u: &Array1<f64>,
    mu_prev: &Array1<f64>,
    p: f64,
    q: f64,
    weight_floor: f64,
) -> Result<Array1<f64>> {
    if u.len() != mu_prev.len() {
        return Err(Error::DimensionMismatch(format!(
            "u has {} entries, μ has {}",
            u.len(),
            mu_prev.len()
        )));
    }
    if u.iter().all(|&v| v <= 0.0) {
        return Err(Error::DegenerateWeights);
    }
    let mu_f = clamp_floor(mu_prev, weight_floor);
    let np = lp_norm(&mu_f, p)?.powf(p);
    let nq = lp_norm(&mu_f, q)?.powf(q);
    let u_bar = Array1::from_shape_fn(u.len(), |i| {
        let m = mu_f[i];
        let denom = m.powf(p - 2.0) / np + m.powf(q - 2.0) / nq;
        u[i] / denom
    });
    let gamma = (lp_norm(&u_bar, p)? * lp_norm(&u_bar, q)?).sqrt();
    if gamma <= 0.0 || !gamma.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    Ok(u_bar.mapv(|v| v / gamma))
}

/// Weight update under a vector ℓ_p-norm constraint; the q=p collapse of the
/// matrix update, normalised by ‖ū‖_p.
pub fn mu_update_vector(
    u: &Array1<f64>,
    mu_prev: &Array1<f64>,
    p: f64,
    weight_floor: f64,
) -> Result<Array1<f64>> {
    if u.len() != mu_prev.len() {
        return Err(Error::DimensionMismatch(format!(
            "u has {} entries, μ has {}",
            u.len(),
            mu_prev.len()
        )));
    }
    if u.iter().all(|&v| v <= 0.0) {
        return Err(Error::DegenerateWeights);
    }
    let mu_f = clamp_floor(mu_prev, weight_floor);
    let np = lp_norm(&mu_f, p)?.powf(p);
    let u_bar = Array1::from_shape_fn(u.len(), |i| u[i] * mu_f[i].powf(2.0 - p) * np);
    let norm = lp_norm(&u_bar, p)?;
    if norm <= 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    Ok(u_bar.mapv(|v| v / norm))
}

/// Regime-aware weight update. Disjoint regimes apply the joint closed form
/// blockwise; a block whose u vanished entirely is reset to the uniform point
/// of its constraint surface (any feasible block is optimal there).
fn mu_update_for_regime(
    regime: Regime,
    u: &Array1<f64>,
    mu_prev: &WeightVector,
    p: f64,
    q: f64,
    weight_floor: f64,
) -> Result<WeightVector> {
    let c = mu_prev.cluster_count();
    let g = mu_prev.kernels_per_cluster();
    let values = match regime {
        Regime::JointMatrix | Regime::NonLocalised | Regime::SingleKernel => {
            mu_update(u, mu_prev.values(), p, q, weight_floor)?
        }
        Regime::JointVector => mu_update_vector(u, mu_prev.values(), p, weight_floor)?,
        Regime::DisjointMatrix | Regime::DisjointVector => {
            if u.iter().all(|&v| v <= 0.0) {
                return Err(Error::DegenerateWeights);
            }
            let mut out = Array1::<f64>::zeros(c * g);
            for cluster in 0..c {
                let span = ndarray::s![cluster * g..(cluster + 1) * g];
                let u_c = u.slice(span).to_owned();
                let mu_c = mu_prev.values().slice(span).to_owned();
                let updated = if u_c.iter().all(|&v| v <= 0.0) {
                    uniform_block(regime, g, p, q)
                } else if regime == Regime::DisjointMatrix {
                    mu_update(&u_c, &mu_c, p, q, weight_floor)?
                } else {
                    mu_update_vector(&u_c, &mu_c, p, weight_floor)?
                };
                out.slice_mut(span).assign(&updated);
            }
            out
        }
    };
    WeightVector::new(values, c, g)
}

fn uniform_block(regime: Regime, g: usize, p: f64, q: f64) -> Array1<f64> {
    let value = match regime {
        Regime::DisjointVector | Regime::JointVector => (g as f64).powf(-1.0 / p),
        _ => (g as f64).powf(-(p + q) / (2.0 * p * q)),
    };
    Array1::from_elem(g, value)
}

/// Uniform weights on the regime's constraint surface.
pub fn init_weights(regime: Regime, clusters: usize, kernels: usize, p: f64, q: f64) -> Array1<f64> {
    let total = clusters * kernels;
    let value = match regime {
        Regime::JointMatrix | Regime::NonLocalised | Regime::SingleKernel => {
            (total as f64).powf(-(p + q) / (2.0 * p * q))
        }
        Regime::JointVector => (total as f64).powf(-1.0 / p),
        Regime::DisjointVector => (kernels as f64).powf(-1.0 / p),
        Regime::DisjointMatrix => (kernels as f64).powf(-(p + q) / (2.0 * p * q)),
    };
    Array1::from_elem(total, value)
}

/// λ = (δI + Σ_cg μ_cg K_cg)⁻¹·1 via Cholesky factorisation, with one step of
/// iterative refinement if the ∞-norm residual exceeds the 1e-8 contract.
pub fn lambda_solve(
    stack: &LocalisedKernelStack,
    mu: &WeightVector,
    delta: f64,
) -> Result<DualVector> {
    if delta <= 0.0 || !delta.is_finite() {
        return Err(Error::InvalidParam(format!("delta must be > 0, got {delta}")));
    }
    if mu.values().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidParam("negative kernel weight".into()));
    }
    let combined = stack.regularised_combination(mu.values(), delta)?;
    let chol = Cholesky::factorise(&combined)?;
    let ones = Array1::<f64>::ones(stack.n());
    let mut lambda = chol.solve(&ones);
    let mut residual = &combined.dot(&lambda) - &ones;
    let mut worst = residual.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if worst > RESIDUAL_TOL {
        let correction = chol.solve(&residual);
        lambda -= &correction;
        residual = &combined.dot(&lambda) - &ones;
        worst = residual.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if worst > RESIDUAL_TOL {
            return Err(Error::Internal(format!(
                "linear solve residual {worst:.3e} above contract"
            )));
        }
    }
    Ok(DualVector::new(lambda))
}

/// Initialisation: λ from uniform weights with unit ℓ_{p,q} product norm,
/// (CG)^{−(p+q)/(2pq)} on every coordinate.
pub fn init_lambda(stack: &LocalisedKernelStack, delta: f64, p: f64, q: f64) -> Result<DualVector> {
    let mu = WeightVector::new(
        init_weights(
            Regime::JointMatrix,
            stack.cluster_count(),
            stack.kernel_count(),
            p,
            q,
        ),
        stack.cluster_count(),
        stack.kernel_count(),
    )?;
    lambda_solve(stack, &mu, delta)
}

/// Saddle objective −λᵀ(Σ μ_cg K_cg)λ − δ·λᵀλ + 2·λᵀ1 at the given pair.
pub fn objective(
    stack: &LocalisedKernelStack,
    mu: &WeightVector,
    lambda: &DualVector,
    delta: f64,
) -> Result<f64> {
    let u = compute_u(stack, lambda)?;
    let weighted: f64 = mu.values().iter().zip(u.iter()).map(|(m, v)| m * v).sum();
    let l2: f64 = lambda.values().iter().map(|v| v * v).sum();
    let sum: f64 = lambda.values().iter().sum();
    Ok(-weighted - delta * l2 + 2.0 * sum)
}

/// ∞-norm residual of (δI + Σ μ_cg K_cg)λ = 1.
pub fn system_residual(
    stack: &LocalisedKernelStack,
    mu: &WeightVector,
    lambda: &DualVector,
    delta: f64,
) -> Result<f64> {
    let combined = stack.regularised_combination(mu.values(), delta)?;
    let ones = Array1::<f64>::ones(stack.n());
    let residual = &combined.dot(lambda.values()) - &ones;
    Ok(residual.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}

/// Stationarity residual of the weight subproblem at (μ, λ), relative to
/// ‖u‖_∞ and measured only on coordinates meaningfully above the floor.
///
/// For matrix-norm regimes the condition is u = γ·(μ^{p−1}/‖μ‖_p^p +
/// μ^{q−1}/‖μ‖_q^q) with γ = μᵀu/2; vector regimes drop the q term and use
/// γ = μᵀu. Disjoint regimes check each block with its own multiplier.
pub fn kkt_residual(
    stack: &LocalisedKernelStack,
    mu: &WeightVector,
    lambda: &DualVector,
    cfg: &MklConfig,
) -> Result<f64> {
    let u = compute_u(stack, lambda)?;
    let u_max = u.iter().fold(0.0f64, |acc, v| acc.max(*v));
    if u_max <= 0.0 {
        return Err(Error::DegenerateWeights);
    }
    let g = mu.kernels_per_cluster();
    let blockwise = matches!(cfg.regime, Regime::DisjointMatrix | Regime::DisjointVector);
    let vector_norm = matches!(cfg.regime, Regime::JointVector | Regime::DisjointVector);
    let blocks: Vec<(usize, usize)> = if blockwise {
        (0..mu.cluster_count()).map(|c| (c * g, (c + 1) * g)).collect()
    } else {
        vec![(0, mu.values().len())]
    };
    let mut worst: f64 = 0.0;
    for (lo, hi) in blocks {
        let span = ndarray::s![lo..hi];
        let mu_b = mu.values().slice(span).to_owned();
        let u_b = u.slice(span).to_owned();
        if u_b.iter().all(|&v| v <= 0.0) {
            continue; // degenerate block: any feasible μ_c is stationary
        }
        let mu_f = clamp_floor(&mu_b, cfg.weight_floor);
        let np = lp_norm(&mu_f, cfg.p)?.powf(cfg.p);
        let inner: f64 = mu_b.iter().zip(u_b.iter()).map(|(m, v)| m * v).sum();
        let (gamma, grad): (f64, Array1<f64>) = if vector_norm {
            let grad = Array1::from_shape_fn(mu_f.len(), |i| mu_f[i].powf(cfg.p - 1.0) / np);
            (inner, grad)
        } else {
            let nq = lp_norm(&mu_f, cfg.q)?.powf(cfg.q);
            let grad = Array1::from_shape_fn(mu_f.len(), |i| {
                mu_f[i].powf(cfg.p - 1.0) / np + mu_f[i].powf(cfg.q - 1.0) / nq
            });
            (inner / 2.0, grad)
        };
        for i in 0..mu_b.len() {
            if mu_b[i] <= 10.0 * cfg.weight_floor {
                continue;
            }
            worst = worst.max((u_b[i] - gamma * grad[i]).abs());
        }
    }
    Ok(worst / u_max)
}

/// Gap to the regime's constraint surface: |‖μ‖_p·‖μ‖_q − 1| for matrix
/// regimes, |‖μ‖_p − 1| for vector regimes, worst block for disjoint ones.
pub fn constraint_gap(mu: &WeightVector, cfg: &MklConfig) -> Result<f64> {
    let gap_matrix = |v: &Array1<f64>| -> Result<f64> {
        Ok((lp_norm(v, cfg.p)? * lp_norm(v, cfg.q)? - 1.0).abs())
    };
    let gap_vector = |v: &Array1<f64>| -> Result<f64> { Ok((lp_norm(v, cfg.p)? - 1.0).abs()) };
    match cfg.regime {
        Regime::JointMatrix | Regime::NonLocalised | Regime::SingleKernel => {
            gap_matrix(mu.values())
        }
        Regime::JointVector => gap_vector(mu.values()),
        Regime::DisjointMatrix | Regime::DisjointVector => {
            let mut worst: f64 = 0.0;
            for c in 0..mu.cluster_count() {
                let block = mu.block(c).to_owned();
                let gap = if cfg.regime == Regime::DisjointMatrix {
                    gap_matrix(&block)?
                } else {
                    gap_vector(&block)?
                };
                worst = worst.max(gap);
            }
            Ok(worst)
        }
    }
}

/// Rescales weights onto the regime's constraint surface (per block for
/// disjoint regimes).
fn renormalise(values: &mut Array1<f64>, regime: Regime, p: f64, q: f64, g: usize) -> Result<()> {
    let scale_matrix = |v: &Array1<f64>| -> Result<f64> {
        Ok((lp_norm(v, p)? * lp_norm(v, q)?).sqrt())
    };
    match regime {
        Regime::JointMatrix | Regime::NonLocalised | Regime::SingleKernel => {
            let t = scale_matrix(values)?;
            values.mapv_inplace(|v| v / t);
        }
        Regime::JointVector => {
            let t = lp_norm(values, p)?;
            values.mapv_inplace(|v| v / t);
        }
        Regime::DisjointMatrix | Regime::DisjointVector => {
            let c = values.len() / g;
            for cluster in 0..c {
                let span = ndarray::s![cluster * g..(cluster + 1) * g];
                let block = values.slice(span).to_owned();
                let t = if regime == Regime::DisjointMatrix {
                    scale_matrix(&block)?
                } else {
                    lp_norm(&block, p)?
                };
                values.slice_mut(span).mapv_inplace(|v| v / t);
            }
        }
    }
    Ok(())
}

fn check_regime_shape(stack: &LocalisedKernelStack, regime: Regime) -> Result<()> {
    match regime {
        Regime::SingleKernel if stack.cluster_count() != 1 || stack.kernel_count() != 1 => {
            Err(Error::InvalidParam(format!(
                "single-kernel regime needs a 1x1 stack, got {}x{}",
                stack.cluster_count(),
                stack.kernel_count()
            )))
        }
        Regime::NonLocalised if stack.cluster_count() != 1 => Err(Error::InvalidParam(format!(
            "non-localised regime needs a single-cluster stack, got C={}",
            stack.cluster_count()
        ))),
        _ => Ok(()),
    }
}

/// Alternating trainer started from the standard uniform-weight λ.
pub fn train(stack: &LocalisedKernelStack, cfg: &MklConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_regime_shape(stack, cfg.regime)?;
    let mu0 = WeightVector::new(
        init_weights(cfg.regime, stack.cluster_count(), stack.kernel_count(), cfg.p, cfg.q),
        stack.cluster_count(),
        stack.kernel_count(),
    )?;
    let lambda0 = lambda_solve(stack, &mu0, cfg.delta)?;
    train_loop(stack, cfg, mu0, lambda0)
}

/// Same trainer from a caller-supplied λ start (the weight state still starts
/// at the uniform point of the constraint surface).
pub fn train_with_init(
    stack: &LocalisedKernelStack,
    cfg: &MklConfig,
    lambda0: &Array1<f64>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_regime_shape(stack, cfg.regime)?;
    if lambda0.len() != stack.n() {
        return Err(Error::DimensionMismatch(format!(
            "λ₀ has {} entries for {} training points",
            lambda0.len(),
            stack.n()
        )));
    }
    let mu0 = WeightVector::new(
        init_weights(cfg.regime, stack.cluster_count(), stack.kernel_count(), cfg.p, cfg.q),
        stack.cluster_count(),
        stack.kernel_count(),
    )?;
    train_loop(stack, cfg, mu0, DualVector::new(lambda0.clone()))
}

fn train_loop(
    stack: &LocalisedKernelStack,
    cfg: &MklConfig,
    mut mu: WeightVector,
    mut lambda: DualVector,
) -> Result<TrainOutcome> {
    let mut changes: Vec<f64> = Vec::new();
    let mut objectives = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    // The plain alternation can settle into a period-2 cycle (larger p at
    // small δ). Whenever progress stalls, blend each weight update with the
    // previous iterate — halving the step on every further stall — and
    // renormalise; the fixed points are unchanged but the cycle is damped.
    let mut step = 1.0f64;
    let mut last_adjustment = 0usize;
    for _ in 0..cfg.max_iter {
        iterations += 1;
        let u = compute_u(stack, &lambda)?;
        let candidate = mu_update_for_regime(cfg.regime, &u, &mu, cfg.p, cfg.q, cfg.weight_floor)?;
        mu = if step < 1.0 {
            let mut blended = mu.values() * (1.0 - step) + candidate.values() * step;
            renormalise(
                &mut blended,
                cfg.regime,
                cfg.p,
                cfg.q,
                mu.kernels_per_cluster(),
            )?;
            WeightVector::new(blended, mu.cluster_count(), mu.kernels_per_cluster())?
        } else {
            candidate
        };
        let next = lambda_solve(stack, &mu, cfg.delta)?;
        let scale = next
            .values()
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let change = lambda
            .values()
            .iter()
            .zip(next.values().iter())
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
            / scale;
        lambda = next;
        changes.push(change);
        objectives.push(objective(stack, &mu, &lambda, cfg.delta)?);
        if change <= cfg.tol {
            converged = true;
            break;
        }
        if changes.len() >= last_adjustment + 4 && step > 1.0 / 128.0 {
            let window = &changes[changes.len() - 4..];
            if window[3] > 0.95 * window[0] {
                step /= 2.0;
                last_adjustment = changes.len();
            }
        }
    }
    Ok(TrainOutcome {
        mu,
        lambda,
        trace: SolveTrace {
            iterations,
            converged,
            lambda_changes: changes,
            objectives,
        },
    })
}
