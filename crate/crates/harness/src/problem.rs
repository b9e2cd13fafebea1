//! Seeded problem instances.
//!
//! A trial is identified by `(seed, trial, m, rank)`. Its generators are
//! ChaCha streams of `seed ⊕ trial`, with stream ids hashed from the cell
//! coordinates, so any single cell can be rerun on its own and reproduce
//! its rows exactly.

use stotiht::analysis::add_noise;
use stotiht::hosvd::random_tucker;
use stotiht::rng;
use stotiht::{reconstruct, DenseTensor, RankTuple, SensingOperator, Shape};

use crate::error::Result;

const TARGET: u64 = 0;
const OPERATOR: u64 = 1;
const NOISE: u64 = 2;
const SOLVER: u64 = 3;

/// FNV-1a over 64-bit words.
pub fn mix(words: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for w in words {
        for byte in w.to_le_bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed ^ trial as u64
}

fn cell_words(m: usize, rank: &RankTuple, role: u64) -> Vec<u64> {
    let mut w = vec![role, m as u64];
    w.extend(rank.ranks().iter().map(|&r| r as u64));
    w
}

/// Stream of `seed ⊕ trial` for one role of one cell.
pub fn cell_stream(seed: u64, trial: usize, m: usize, rank: &RankTuple, role: u64) -> rng::Rng {
    rng::stream(trial_seed(seed, trial), mix(&cell_words(m, rank, role)))
}

/// Seed for the solver's batch sampler.
pub fn solver_seed(seed: u64, trial: usize, m: usize, rank: &RankTuple) -> u64 {
    let mut w = cell_words(m, rank, SOLVER);
    w.push(trial_seed(seed, trial));
    mix(&w)
}

pub struct Instance {
    pub op: SensingOperator,
    pub truth: DenseTensor,
    pub y: Vec<f64>,
}

impl Instance {
    /// Random Tucker-rank-`rank` target with Gaussian core and factors,
    /// a normalized Gaussian operator, and measurements `y = A(X*) + e`.
    ///
    /// `noise` is relative: `e` has i.i.d. entries of standard deviation
    /// `noise · ‖A(X*)‖₂ / √m`, so `‖e‖₂ ≈ noise · ‖A(X*)‖₂`.
    pub fn generate(
        shape: &Shape,
        rank: &RankTuple,
        m: usize,
        noise: f64,
        seed: u64,
        trial: usize,
    ) -> Result<Self> {
        let mut g = cell_stream(seed, trial, m, rank, TARGET);
        let truth = reconstruct(&random_tucker(shape, rank, &mut g)?)?;
        let mut g = cell_stream(seed, trial, m, rank, OPERATOR);
        let op = SensingOperator::gaussian(shape.clone(), m, &mut g)?;
        Self::measure(op, truth, noise, seed, trial, rank)
    }

    /// Measures a given tensor with a fresh operator.
    pub fn from_target(
        truth: DenseTensor,
        rank: &RankTuple,
        m: usize,
        noise: f64,
        seed: u64,
        trial: usize,
    ) -> Result<Self> {
        let mut g = cell_stream(seed, trial, m, rank, OPERATOR);
        let op = SensingOperator::gaussian(truth.shape().clone(), m, &mut g)?;
        Self::measure(op, truth, noise, seed, trial, rank)
    }

    fn measure(
        op: SensingOperator,
        truth: DenseTensor,
        noise: f64,
        seed: u64,
        trial: usize,
        rank: &RankTuple,
    ) -> Result<Self> {
        let clean = op.apply(&truth)?;
        let y = if noise > 0.0 {
            let m = op.m();
            let level = noise * clean.iter().map(|v| v * v).sum::<f64>().sqrt() / (m as f64).sqrt();
            add_noise(&clean, level, &mut cell_stream(seed, trial, m, rank, NOISE))
        } else {
            clean
        };
        Ok(Self { op, truth, y })
    }
}
