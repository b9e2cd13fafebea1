//! Tensor iterative hard thresholding (TIHT) and its stochastic variant
//! (StoTIHT).
//!
//! One TIHT iteration is
//!
//! ```text
//! X̃ = X + μ A*(y − A(X)),        X⁺ = H_r(X̃)
//! ```
//!
//! and one StoTIHT iteration draws a batch `i` with probability `p(i)` and
//! replaces the full back-projection by the batch block:
//!
//! ```text
//! X̃ = X + μ / (M p(i)) · A_{b_i}*(y_{b_i} − A_{b_i}(X)),   X⁺ = H_r(X̃)
//! ```
//!
//! With `b = m` (one batch, `p = 1`) the two updates are the same floating
//! point computation. In terms of the batch gradient the stochastic step is
//! `X − μ (m/M) / (M p(i)) · ∇f_i(X)`; averaged over the batch draw it equals
//! a TIHT step with stepsize `μ / M`.
//!
//! Stepsizes are raw `μ`. Because the Gaussian operator is normalized to
//! `‖A‖_F = 1`, useful values scale with `m` (e.g. `μ = 0.46 m`).

use std::time::Instant;

use rand::Rng;

use crate::error::{invalid, Result};
use crate::hosvd::project_rank_r;
use crate::rng;
use crate::sensing::{BatchPartition, SensingOperator};
use crate::tensor::{DenseTensor, RankTuple};

/// Cost above which a run is declared diverged.
pub const DIVERGENCE_COST: f64 = 1e12;

#[derive(Clone, Debug, PartialEq)]
pub enum Probabilities {
    Uniform,
    Explicit(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub rank: RankTuple,
    pub mu: f64,
    /// `b`; `b = m` selects TIHT.
    pub batch_size: usize,
    pub probabilities: Probabilities,
    pub max_epochs: usize,
    /// Stop once the relative error against the ground truth drops below
    /// this value. Ignored when no ground truth is supplied.
    pub success_tol: f64,
    /// Stop once `F(X) <= cost_tol`.
    pub cost_tol: f64,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(rank: RankTuple, mu: f64, batch_size: usize) -> Self {
        Self {
            rank,
            mu,
            batch_size,
            probabilities: Probabilities::Uniform,
            max_epochs: 200,
            success_tol: 1e-5,
            cost_tol: 0.0,
            seed: 0,
        }
    }

    pub fn partition(&self, m: usize) -> Result<BatchPartition> {
        match &self.probabilities {
            Probabilities::Uniform => BatchPartition::uniform(m, self.batch_size),
            Probabilities::Explicit(p) => {
                BatchPartition::with_probabilities(m, self.batch_size, p.clone())
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return invalid(format!("stepsize must be finite and nonnegative, got {}", self.mu));
        }
        if self.max_epochs == 0 {
            return invalid("max_epochs must be positive");
        }
        if !(self.success_tol > 0.0) {
            return invalid("success_tol must be positive");
        }
        if !(self.cost_tol >= 0.0) {
            return invalid("cost_tol must be nonnegative");
        }
        Ok(())
    }
}

/// Snapshot handed to run observers after every iteration.
#[derive(Clone, Debug)]
pub struct IterateState<'a> {
    pub x: &'a DenseTensor,
    /// One-based epoch the iteration belongs to.
    pub epoch: usize,
    /// One-based iteration counter across the whole run.
    pub iteration: usize,
    /// Batch drawn for this iteration (always 0 for TIHT).
    pub batch: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub cost: f64,
    /// `‖X − X*‖_F / ‖X*‖_F` when the ground truth is known.
    pub rel_error: Option<f64>,
    /// Wall-clock seconds since the start of the run.
    pub seconds: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    MaxEpochs,
    Diverged,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxEpochs => "max_epochs",
            RunStatus::Diverged => "diverged",
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunTrace {
    pub records: Vec<EpochRecord>,
    pub status: RunStatus,
    pub iterations_per_epoch: usize,
    pub iterations: usize,
}

impl RunTrace {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn final_rel_error(&self) -> Option<f64> {
        self.last().and_then(|r| r.rel_error)
    }

    /// First epoch whose relative error is strictly below `tol`.
    pub fn first_epoch_below(&self, tol: f64) -> Option<usize> {
        self.records
            .iter()
            .find(|r| r.rel_error.is_some_and(|e| e < tol))
            .map(|r| r.epoch)
    }
}

/// `X + μ A*(y − A(X))`.
pub fn tiht_gradient_point(
    op: &SensingOperator,
    y: &[f64],
    x: &DenseTensor,
    mu: f64,
) -> Result<DenseTensor> {
    op.check_tensor(x)?;
    op.check_measurements(y)?;
    Ok(step_point(op, 0..op.m(), mu, y, x))
}

/// `X + μ/(M p(i)) · A_{b_i}*(y_{b_i} − A_{b_i}(X))`.
pub fn stotiht_gradient_point(
    op: &SensingOperator,
    part: &BatchPartition,
    y: &[f64],
    x: &DenseTensor,
    mu: f64,
    batch: usize,
) -> Result<DenseTensor> {
    op.check_tensor(x)?;
    op.check_measurements(y)?;
    op.check_partition(part)?;
    let range = part.range(batch)?;
    let scale = mu / (part.count() as f64 * part.probabilities()[batch]);
    Ok(step_point(op, range, scale, y, x))
}

fn step_point(
    op: &SensingOperator,
    range: std::ops::Range<usize>,
    scale: f64,
    y: &[f64],
    x: &DenseTensor,
) -> DenseTensor {
    let g = op.backproject_residual(range, y, x.data());
    let data = x.data().iter().zip(g).map(|(a, b)| a + scale * b).collect();
    DenseTensor::from_parts(x.shape().clone(), data)
}

/// One TIHT iteration: a full gradient step followed by `H_r`.
pub fn tiht_step(
    op: &SensingOperator,
    y: &[f64],
    x: &DenseTensor,
    mu: f64,
    rank: &RankTuple,
) -> Result<DenseTensor> {
    project_rank_r(&tiht_gradient_point(op, y, x, mu)?, rank)
}

/// One StoTIHT iteration on batch `batch`.
pub fn stotiht_step(
    op: &SensingOperator,
    part: &BatchPartition,
    y: &[f64],
    x: &DenseTensor,
    mu: f64,
    rank: &RankTuple,
    batch: usize,
) -> Result<DenseTensor> {
    project_rank_r(&stotiht_gradient_point(op, part, y, x, mu, batch)?, rank)
}

/// Draws a batch index with probability `p(i)`.
pub fn sample_batch<R: Rng + ?Sized>(part: &BatchPartition, rng: &mut R) -> usize {
    let probs = part.probabilities();
    if probs.len() == 1 {
        return 0;
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Runs TIHT (`b = m`) or StoTIHT from `X⁰ = 0`.
///
/// One epoch is `M = ⌈m/b⌉` iterations. A record is appended after every
/// completed epoch; the run stops on the first of: cost at or below
/// `cost_tol`, relative error below `success_tol` (only with ground truth),
/// divergence, or `max_epochs`.
pub fn run(
    op: &SensingOperator,
    y: &[f64],
    config: &SolverConfig,
    ground_truth: Option<&DenseTensor>,
) -> Result<(DenseTensor, RunTrace)> {
    run_observed(op, y, config, ground_truth, |_| {})
}

/// [`run`] with a callback invoked after every iteration.
pub fn run_observed(
    op: &SensingOperator,
    y: &[f64],
    config: &SolverConfig,
    ground_truth: Option<&DenseTensor>,
    mut observe: impl FnMut(&IterateState<'_>),
) -> Result<(DenseTensor, RunTrace)> {
    config.validate()?;
    op.check_measurements(y)?;
    config.rank.check(op.shape())?;
    if let Some(t) = ground_truth {
        op.check_tensor(t)?;
    }
    let part = config.partition(op.m())?;
    let per_epoch = part.count();
    let truth_norm = ground_truth.map(|t| t.frobenius_norm());
    let mut rng = rng::from_seed(config.seed);

    let mut x = DenseTensor::zeros(op.shape().clone());
    let mut records = Vec::with_capacity(config.max_epochs);
    let mut iterations = 0;
    let mut status = RunStatus::MaxEpochs;
    let start = Instant::now();

    'epochs: for epoch in 1..=config.max_epochs {
        for _ in 0..per_epoch {
            let batch = sample_batch(&part, &mut rng);
            let point = if per_epoch == 1 {
                tiht_gradient_point(op, y, &x, config.mu)?
            } else {
                stotiht_gradient_point(op, &part, y, &x, config.mu, batch)?
            };
            if !point.is_finite() {
                status = RunStatus::Diverged;
                break 'epochs;
            }
            x = project_rank_r(&point, &config.rank)?;
            iterations += 1;
            observe(&IterateState {
                x: &x,
                epoch,
                iteration: iterations,
                batch,
            });
        }

        let cost = op.cost_full(y, &x)?;
        let rel_error = ground_truth.map(|t| {
            let d = x.distance(t).expect("shape checked");
            match truth_norm {
                Some(n) if n > 0.0 => d / n,
                _ => d,
            }
        });
        records.push(EpochRecord {
            epoch,
            cost,
            rel_error,
            seconds: start.elapsed().as_secs_f64(),
        });

        if !cost.is_finite() || cost > DIVERGENCE_COST {
            status = RunStatus::Diverged;
            break;
        }
        if cost <= config.cost_tol || rel_error.is_some_and(|e| e < config.success_tol) {
            status = RunStatus::Converged;
            break;
        }
    }

    Ok((
        x,
        RunTrace {
            records,
            status,
            iterations_per_epoch: per_epoch,
            iterations,
        },
    ))
}
