//! Linear measurement model `y(i) = ⟨A_i, X⟩` and the batched least-squares
//! cost built on it.
//!
//! The `m` sensing tensors are stored as the rows of one dense row-major
//! `m × N` matrix, so measuring and back-projecting are matrix-vector
//! products and a batch is a contiguous block of rows.
//!
//! Batch costs use the prefactor `M / (2m)`. When `b` divides `m` this is the
//! usual `1 / (2b)`; for a ragged final batch it keeps both
//! `F = (1/M) Σ f_i` and `Σ_i p(i) · ∇f_i / (M p(i)) = ∇F` exact.

use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::hosvd::{random_tucker, reconstruct};
use crate::rng;
use crate::tensor::{dot, DenseTensor, RankTuple, Shape};

#[derive(Clone, Debug)]
pub struct SensingOperator {
    shape: Shape,
    m: usize,
    /// Row-major; row `i` is `vec(A_i)`.
    rows: Vec<f64>,
}

impl SensingOperator {
    /// Wraps a row-major `m × N` matrix whose rows are vectorized sensing
    /// tensors.
    pub fn from_rows(shape: Shape, m: usize, rows: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return invalid("at least one measurement is required");
        }
        if rows.len() != m * shape.len() {
            return invalid(format!(
                "operator data has {} entries, expected {m}x{}",
                rows.len(),
                shape.len()
            ));
        }
        if let Some(pos) = rows.iter().position(|v| !v.is_finite()) {
            return invalid(format!("operator entry {pos} is not finite"));
        }
        Ok(Self { shape, m, rows })
    }

    /// I.i.d. `N(0, 1)` entries rescaled by `1/‖A‖_F`, so the full `m × N`
    /// matrix has unit Frobenius norm.
    pub fn gaussian<R: Rng + ?Sized>(shape: Shape, m: usize, rng: &mut R) -> Result<Self> {
        if m == 0 {
            return invalid("at least one measurement is required");
        }
        let len = m
            .checked_mul(shape.len())
            .ok_or_else(|| crate::Error::InvalidArgument("operator too large".into()))?;
        let mut rows: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dot(&rows, &rows).sqrt();
        let scale = 1.0 / norm;
        rows.iter_mut().for_each(|v| *v *= scale);
        Ok(Self { shape, m, rows })
    }

    /// Measurement count `m`.
    pub fn m(&self) -> usize {
        self.m
    }

    /// `N`, the vectorized tensor length.
    pub fn n(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n();
        &self.rows[i * n..(i + 1) * n]
    }

    /// `A_i` as a tensor.
    pub fn sensing_tensor(&self, i: usize) -> DenseTensor {
        DenseTensor::from_parts(self.shape.clone(), self.row(i).to_vec())
    }

    pub fn frobenius_norm(&self) -> f64 {
        dot(&self.rows, &self.rows).sqrt()
    }

    /// `A(X)`.
    pub fn apply(&self, x: &DenseTensor) -> Result<Vec<f64>> {
        self.check_tensor(x)?;
        Ok(self.apply_rows(0..self.m, x.data()))
    }

    /// `A*(y) = Σ y(i) A_i`.
    pub fn adjoint(&self, y: &[f64]) -> Result<DenseTensor> {
        self.check_measurements(y)?;
        Ok(DenseTensor::from_parts(
            self.shape.clone(),
            self.adjoint_rows(0..self.m, y),
        ))
    }

    /// `A_{b_i}(X)`: the entries of `A(X)` belonging to batch `i`.
    pub fn apply_batch(&self, part: &BatchPartition, i: usize, x: &DenseTensor) -> Result<Vec<f64>> {
        let range = self.batch_range(part, i)?;
        self.check_tensor(x)?;
        Ok(self.apply_rows(range, x.data()))
    }

    /// `F(X) = (1/2m) ‖y − A(X)‖²`.
    pub fn cost_full(&self, y: &[f64], x: &DenseTensor) -> Result<f64> {
        self.check_tensor(x)?;
        self.check_measurements(y)?;
        Ok(self.residual_energy(0..self.m, y, x.data()) / (2.0 * self.m as f64))
    }

    /// `f_i(X) = (M/2m) ‖y_{b_i} − A_{b_i}(X)‖²`.
    pub fn cost_batch(&self, part: &BatchPartition, i: usize, y: &[f64], x: &DenseTensor) -> Result<f64> {
        let range = self.batch_range(part, i)?;
        self.check_tensor(x)?;
        self.check_measurements(y)?;
        Ok(part.weight() / 2.0 * self.residual_energy(range, y, x.data()))
    }

    /// `∇F(X) = (1/m) A*(A(X) − y)`.
    pub fn grad_full(&self, y: &[f64], x: &DenseTensor) -> Result<DenseTensor> {
        self.check_tensor(x)?;
        self.check_measurements(y)?;
        let g = self.backproject_residual(0..self.m, y, x.data());
        let s = -1.0 / self.m as f64;
        Ok(DenseTensor::from_parts(
            self.shape.clone(),
            g.into_iter().map(|v| s * v).collect(),
        ))
    }

    /// `∇f_i(X) = (M/m) A_{b_i}*(A_{b_i}(X) − y_{b_i})`.
    pub fn grad_batch(&self, part: &BatchPartition, i: usize, y: &[f64], x: &DenseTensor) -> Result<DenseTensor> {
        let range = self.batch_range(part, i)?;
        self.check_tensor(x)?;
        self.check_measurements(y)?;
        let g = self.backproject_residual(range, y, x.data());
        let s = -part.weight();
        Ok(DenseTensor::from_parts(
            self.shape.clone(),
            g.into_iter().map(|v| s * v).collect(),
        ))
    }

    /// `A_Rᵀ (y_R − A_R x)` over the row range `R`, unscaled.
    pub(crate) fn backproject_residual(&self, range: Range<usize>, y: &[f64], x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n];
        for i in range {
            let row = &self.rows[i * n..(i + 1) * n];
            let r = y[i] - dot(row, x);
            for (o, &a) in out.iter_mut().zip(row) {
                *o += r * a;
            }
        }
        out
    }

    fn apply_rows(&self, range: Range<usize>, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        range
            .map(|i| dot(&self.rows[i * n..(i + 1) * n], x))
            .collect()
    }

    fn adjoint_rows(&self, range: Range<usize>, y: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut out = vec![0.0; n];
        for i in range {
            let c = y[i];
            for (o, &a) in out.iter_mut().zip(&self.rows[i * n..(i + 1) * n]) {
                *o += c * a;
            }
        }
        out
    }

    fn residual_energy(&self, range: Range<usize>, y: &[f64], x: &[f64]) -> f64 {
        let n = self.n();
        range
            .map(|i| {
                let r = y[i] - dot(&self.rows[i * n..(i + 1) * n], x);
                r * r
            })
            .sum()
    }

    pub(crate) fn check_tensor(&self, x: &DenseTensor) -> Result<()> {
        if x.shape() != &self.shape {
            return invalid(format!(
                "tensor shape {} does not match operator shape {}",
                x.shape(),
                self.shape
            ));
        }
        Ok(())
    }

    pub(crate) fn check_measurements(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.m {
            return invalid(format!(
                "measurement vector has length {}, operator has {} rows",
                y.len(),
                self.m
            ));
        }
        Ok(())
    }

    pub(crate) fn check_partition(&self, part: &BatchPartition) -> Result<()> {
        if part.m() != self.m {
            return invalid(format!(
                "partition covers {} measurements, operator has {}",
                part.m(),
                self.m
            ));
        }
        Ok(())
    }

    fn batch_range(&self, part: &BatchPartition, i: usize) -> Result<Range<usize>> {
        self.check_partition(part)?;
        part.range(i)
    }
}

/// Contiguous split of `0..m` into `M = ⌈m/b⌉` batches with sampling
/// probabilities `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchPartition {
    m: usize,
    b: usize,
    probs: Vec<f64>,
}

impl BatchPartition {
    pub fn uniform(m: usize, b: usize) -> Result<Self> {
        check_sizes(m, b)?;
        let count = m.div_ceil(b);
        Ok(Self {
            m,
            b,
            probs: vec![1.0 / count as f64; count],
        })
    }

    /// Explicit probabilities; each must be positive and they must sum to
    /// one within `1e-12`.
    pub fn with_probabilities(m: usize, b: usize, probs: Vec<f64>) -> Result<Self> {
        check_sizes(m, b)?;
        let count = m.div_ceil(b);
        if probs.len() != count {
            return invalid(format!("{} probabilities for {count} batches", probs.len()));
        }
        if let Some(i) = probs.iter().position(|&p| !(p > 0.0 && p.is_finite())) {
            return invalid(format!("batch probability {i} is {} (must be positive)", probs[i]));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return invalid(format!("batch probabilities sum to {sum}"));
        }
        Ok(Self { m, b, probs })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Nominal batch size `b`.
    pub fn batch_size(&self) -> usize {
        self.b
    }

    /// Batch count `M`.
    pub fn count(&self) -> usize {
        self.probs.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn p_min(&self) -> f64 {
        self.probs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Row range of batch `i` (zero-based).
    pub fn range(&self, i: usize) -> Result<Range<usize>> {
        if i >= self.count() {
            return invalid(format!(
                "batch index {i} out of range for {} batches",
                self.count()
            ));
        }
        let lo = i * self.b;
        Ok(lo..(lo + self.b).min(self.m))
    }

    /// `M / m`, the batch cost prefactor (times two).
    pub fn weight(&self) -> f64 {
        self.count() as f64 / self.m as f64
    }
}

fn check_sizes(m: usize, b: usize) -> Result<()> {
    if m == 0 {
        return invalid("at least one measurement is required");
    }
    if b == 0 || b > m {
        return invalid(format!("batch size {b} must lie in 1..={m}"));
    }
    Ok(())
}

/// Empirical lower bounds on the TRIP constant `δ_r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TripEstimate {
    /// `max |(1/m)‖A(X)‖² − 1|` over the sampled unit-norm tensors.
    pub delta_lower_full: f64,
    /// `max max(0, (1/|b_i|)‖A_{b_i}(X)‖² − 1)` over samples and batches.
    pub delta_lower_batch: f64,
}

/// Probes the restricted isometry of `op` on random unit-Frobenius tensors
/// of Tucker rank `rank`.
///
/// Sample `t` is drawn from its own stream of `seed`, so the sample set for
/// `trials = k` is a prefix of the one for `trials = k + 1` and the
/// estimates are monotone in `trials`.
pub fn trip_estimate(
    op: &SensingOperator,
    part: &BatchPartition,
    rank: &RankTuple,
    trials: usize,
    seed: u64,
) -> Result<TripEstimate> {
    op.check_partition(part)?;
    rank.check(op.shape())?;
    if trials == 0 {
        return invalid("trip_estimate needs at least one trial");
    }
    let per_trial = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut g = rng::stream(seed, t as u64);
            let x = reconstruct(&random_tucker(op.shape(), rank, &mut g)?)?;
            let x = x.scaled(1.0 / x.frobenius_norm());
            let ax = op.apply(&x)?;
            let full = (dot(&ax, &ax) / op.m() as f64 - 1.0).abs();
            let mut batch: f64 = 0.0;
            for i in 0..part.count() {
                let r = part.range(i)?;
                let len = r.len() as f64;
                let e = dot(&ax[r.clone()], &ax[r]) / len - 1.0;
                batch = batch.max(e);
            }
            Ok((full, batch))
        })
        .collect::<Result<Vec<_>>>()?;
    let (full, batch) = per_trial
        .into_iter()
        .fold((0.0f64, 0.0f64), |(a, b), (f, g)| (a.max(f), b.max(g)));
    Ok(TripEstimate {
        delta_lower_full: full,
        delta_lower_batch: batch,
    })
}
