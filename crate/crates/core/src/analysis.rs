//! Constants of the linear convergence bound for StoTIHT,
//!
//! ```text
//! E‖X^{t+1} − X*‖_F ≤ κ^{t+1} ‖X⁰ − X*‖_F + σ_{X*}
//! ```
//!
//! with `ρ⁺ = 2(1+δ)`, `ρ⁻ = 1−δ`, `α = max_i ρ⁺/(M p(i))` evaluated at the
//! TRIP constant of rank `3r`. The stepsize `μ` here is the one multiplying
//! the batch gradient `∇f_i` (the theorem's normalization), which differs
//! from the raw solver stepsize by the factor `m/M`.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::rng;
use crate::sensing::{BatchPartition, SensingOperator};
use crate::solvers::sample_batch;
use crate::tensor::DenseTensor;

pub fn rho_plus(delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(2.0 * (1.0 + delta))
}

pub fn rho_minus(delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(1.0 - delta)
}

/// `α = ρ⁺ / (M · min_i p(i))`.
pub fn alpha(delta: f64, batches: usize, p_min: f64) -> Result<f64> {
    check_batches(batches, p_min)?;
    Ok(rho_plus(delta)? / (batches as f64 * p_min))
}

fn check_delta(delta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&delta) {
        return invalid(format!("TRIP constant must lie in [0, 1), got {delta}"));
    }
    Ok(())
}

fn check_batches(batches: usize, p_min: f64) -> Result<()> {
    if batches == 0 {
        return invalid("batch count must be positive");
    }
    if !(p_min > 0.0 && p_min <= 1.0 / batches as f64 + 1e-12) {
        return invalid(format!(
            "minimum probability {p_min} must lie in (0, 1/M] for M = {batches}"
        ));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryParams {
    /// TRIP constant at rank `3r`.
    pub delta_3r: f64,
    pub eta: f64,
    pub mu: f64,
    pub batches: usize,
    pub p_min: f64,
}

impl TheoryParams {
    pub fn uniform(delta_3r: f64, eta: f64, mu: f64, batches: usize) -> Self {
        Self {
            delta_3r,
            eta,
            mu,
            batches,
            p_min: 1.0 / batches as f64,
        }
    }

    fn validate(&self) -> Result<()> {
        check_delta(self.delta_3r)?;
        check_batches(self.batches, self.p_min)?;
        if !(self.eta >= 1.0 && self.eta.is_finite()) {
            return invalid(format!("eta must be at least 1, got {}", self.eta));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return invalid(format!("stepsize must be positive, got {}", self.mu));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Kappa {
    Feasible(f64),
    /// One of the square roots has a negative argument; the bound says
    /// nothing for these parameters.
    Infeasible { contraction_radicand: f64, expansion_radicand: f64 },
}

impl Kappa {
    pub fn value(self) -> Option<f64> {
        match self {
            Kappa::Feasible(k) => Some(k),
            Kappa::Infeasible { .. } => None,
        }
    }

    /// `κ < 1`.
    pub fn is_contraction(self) -> bool {
        self.value().is_some_and(|k| k < 1.0)
    }
}

/// `κ = 2√(1 − (2 − μα)μρ⁻) + √(η² − 1)·√(1 + μ²αρ⁺ − 2μρ⁻)`.
pub fn kappa(tp: &TheoryParams) -> Result<Kappa> {
    tp.validate()?;
    let rp = rho_plus(tp.delta_3r)?;
    let rm = rho_minus(tp.delta_3r)?;
    let a = alpha(tp.delta_3r, tp.batches, tp.p_min)?;
    let mu = tp.mu;
    let first = 1.0 - (2.0 - mu * a) * mu * rm;
    let second = 1.0 + mu * mu * a * rp - 2.0 * mu * rm;
    let eta_term = (tp.eta * tp.eta - 1.0).sqrt();
    // η = 1 removes the second term whatever its radicand.
    let second_used = eta_term > 0.0;
    if first < 0.0 || (second_used && second < 0.0) {
        return Ok(Kappa::Infeasible {
            contraction_radicand: first,
            expansion_radicand: second,
        });
    }
    let tail = if second_used { eta_term * second.sqrt() } else { 0.0 };
    Ok(Kappa::Feasible(2.0 * first.sqrt() + tail))
}

/// Monte-Carlo estimate of the tolerance `σ_{X*}`.
///
/// The projection onto the run-dependent subspace `U^t` is replaced by its
/// norm bound `‖P_U(Z)‖ ≤ ‖Z‖`, so the estimate over-states `σ`:
///
/// ```text
/// σ̂ = μ/(M min p) · (2 + √(η²−1)) · mean_t ‖∇f_{i_t}(X*)‖_F
/// ```
///
/// With noiseless measurements every batch gradient vanishes at `X*` and
/// the estimate is exactly zero.
pub fn sigma_estimate(
    op: &SensingOperator,
    part: &BatchPartition,
    y: &[f64],
    x_star: &DenseTensor,
    mu: f64,
    eta: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return invalid("sigma_estimate needs at least one draw");
    }
    if !(mu > 0.0) || !(eta >= 1.0) {
        return invalid("sigma_estimate needs mu > 0 and eta >= 1");
    }
    let mut g = rng::from_seed(seed);
    let mut norms = vec![None; part.count()];
    let mut total = 0.0;
    for _ in 0..trials {
        let i = sample_batch(part, &mut g);
        let n = match norms[i] {
            Some(n) => n,
            None => {
                let n = op.grad_batch(part, i, y, x_star)?.frobenius_norm();
                norms[i] = Some(n);
                n
            }
        };
        total += n;
    }
    let mean = total / trials as f64;
    let prefactor = mu / (part.count() as f64 * part.p_min());
    Ok(prefactor * (2.0 + (eta * eta - 1.0).sqrt()) * mean)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EtaMethod {
    /// `√(2d − 3)`
    Sqrt2dMinus3,
    /// `√(2d − 2)`
    Sqrt2dMinus2,
    /// `(2 + √2)√d`
    TwoPlusSqrt2SqrtD,
}

/// Worst-case quasi-optimality constants of HOSVD-type truncations.
pub fn eta_hosvd(d: usize, method: EtaMethod) -> Result<f64> {
    if d < 2 {
        return invalid(format!("eta_hosvd needs order d >= 2, got {d}"));
    }
    let d = d as f64;
    Ok(match method {
        EtaMethod::Sqrt2dMinus3 => (2.0 * d - 3.0).sqrt(),
        EtaMethod::Sqrt2dMinus2 => (2.0 * d - 2.0).sqrt(),
        EtaMethod::TwoPlusSqrt2SqrtD => (2.0 + std::f64::consts::SQRT_2) * d.sqrt(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCheck {
    /// `C δ⁻² (r^d + d n r)`.
    pub threshold: f64,
    pub full_ok: bool,
    pub batch_ok: bool,
}

/// Checks `m` and `b` against the Gaussian sample-complexity bound
/// `C δ⁻² (r^d + d n r)`. One constant `C` serves both inequalities.
pub fn sample_bound_check(
    m: usize,
    b: usize,
    delta: f64,
    n_max: usize,
    r_max: usize,
    d: usize,
    c: f64,
) -> Result<BoundCheck> {
    if delta == 0.0 {
        return invalid("bound is infinite at delta = 0; not checkable");
    }
    if !(delta > 0.0 && delta.is_finite()) || !(c > 0.0) {
        return invalid("delta and C must be positive");
    }
    if m == 0 || b == 0 || n_max == 0 || r_max == 0 || d == 0 {
        return invalid("sizes must be positive");
    }
    let (n, r, dd) = (n_max as f64, r_max as f64, d as f64);
    let threshold = c / (delta * delta) * (r.powi(d as i32) + dd * n * r);
    Ok(BoundCheck {
        threshold,
        full_ok: m as f64 >= threshold,
        batch_ok: b as f64 >= threshold,
    })
}

/// Additive Gaussian noise of standard deviation `level` on `y`.
pub fn add_noise<R: Rng + ?Sized>(y: &[f64], level: f64, rng: &mut R) -> Vec<f64> {
    y.iter()
        .map(|v| v + level * rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect()
}
