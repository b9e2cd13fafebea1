//! Thin SVD and the truncated higher-order SVD.
//!
//! [`project_rank_r`] is the thresholding operator `H_r` used by both
//! solvers: for each mode it keeps the leading `r_i` left singular vectors
//! of the unfolding of the *input* tensor (one-pass HOSVD), forms the core
//! and maps it back.

use crate::error::{invalid, Error, Result};
use crate::tensor::{DenseTensor, Matrix, RankTuple, Shape};

const MAX_SWEEPS: usize = 80;

/// `mat = u · diag(s) · vᵀ` with `s` nonincreasing.
#[derive(Clone, Debug)]
pub struct Svd {
    /// `rows × k`, orthonormal columns.
    pub u: Matrix,
    /// `k = min(rows, cols)` singular values, nonincreasing.
    pub s: Vec<f64>,
    /// `cols × k`, orthonormal columns.
    pub v: Matrix,
}

impl Svd {
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, &s) in self.s.iter().enumerate() {
            us.col_mut(j).iter_mut().for_each(|x| *x *= s);
        }
        us.matmul(&self.v.transpose()).expect("consistent factors")
    }
}

/// Thin SVD by one-sided Jacobi rotations.
///
/// Rotations are applied along the smaller dimension, so for a wide matrix
/// the work is `O(rows² · cols)` per sweep.
/// Each left singular vector is signed so that its largest-magnitude entry
/// is positive.
pub fn svd_thin(mat: &Matrix) -> Result<Svd> {
    if let Some(pos) = mat.data().iter().position(|v| !v.is_finite()) {
        return invalid(format!("matrix entry {pos} is not finite"));
    }
    let (rows, cols) = (mat.rows(), mat.cols());
    if rows == 0 || cols == 0 {
        return invalid("svd of an empty matrix");
    }
    let svd = if rows <= cols {
        jacobi_rows(mat)
    } else {
        // matᵀ = U' Σ V'ᵀ  =>  mat = V' Σ U'ᵀ
        let t = jacobi_rows(&mat.transpose());
        Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        }
    };
    Ok(fix_signs(svd))
}

/// One-sided Jacobi on the rows of a `k × n` matrix with `k <= n`.
fn jacobi_rows(mat: &Matrix) -> Svd {
    let (k, n) = (mat.rows(), mat.cols());
    // Row-major copy: rows[i] is the i-th row of W = Uᵀ mat.
    let mut w: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..n).map(|j| mat.get(i, j)).collect())
        .collect();
    // u[i] is the i-th column of U.
    let mut u: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let mut e = vec![0.0; k];
            e[i] = 1.0;
            e
        })
        .collect();

    let eps = f64::EPSILON;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let (alpha, beta, gamma) = {
                    let (wp, wq) = (&w[p], &w[q]);
                    let mut a = 0.0;
                    let mut b = 0.0;
                    let mut g = 0.0;
                    for (x, y) in wp.iter().zip(wq) {
                        a += x * x;
                        b += y * y;
                        g += x * y;
                    }
                    (a, b, g)
                };
                if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut u, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = w.iter().map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    // Stable: ties keep their original index order.
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let mut u_out = Matrix::zeros(k, k);
    let mut v_out = Matrix::zeros(n, k);
    let mut s_out = Vec::with_capacity(k);
    let mut missing = Vec::new();
    for (col, &i) in order.iter().enumerate() {
        u_out.col_mut(col).copy_from_slice(&u[i]);
        let s = norms[i];
        s_out.push(s);
        if s > 0.0 {
            for (dst, &x) in v_out.col_mut(col).iter_mut().zip(&w[i]) {
                *dst = x / s;
            }
        } else {
            missing.push(col);
        }
    }
    if !missing.is_empty() {
        fill_orthonormal(&mut v_out, &missing);
    }
    Svd {
        u: u_out,
        s: s_out,
        v: v_out,
    }
}

fn rotate(vs: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = vs.split_at_mut(q);
    let (vp, vq) = (&mut head[p], &mut tail[0]);
    for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
        let (a, b) = (*x, *y);
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Replaces the listed columns of `m` with unit vectors orthogonal to every
/// other column, by Gram–Schmidt over the standard basis.
fn fill_orthonormal(m: &mut Matrix, cols: &[usize]) {
    let rows = m.rows();
    let mut filled: Vec<usize> = (0..m.cols()).filter(|c| !cols.contains(c)).collect();
    let mut candidate = 0;
    for &target in cols {
        loop {
            assert!(candidate < rows, "no orthonormal completion exists");
            let mut e = vec![0.0; rows];
            e[candidate] = 1.0;
            candidate += 1;
            // Two passes of modified Gram-Schmidt.
            for _ in 0..2 {
                for &f in &filled {
                    let proj: f64 = m.col(f).iter().zip(&e).map(|(a, b)| a * b).sum();
                    for (x, &a) in e.iter_mut().zip(m.col(f)) {
                        *x -= proj * a;
                    }
                }
            }
            let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                for (dst, x) in m.col_mut(target).iter_mut().zip(&e) {
                    *dst = x / norm;
                }
                filled.push(target);
                break;
            }
        }
    }
}

fn fix_signs(mut svd: Svd) -> Svd {
    for j in 0..svd.s.len() {
        let col = svd.u.col(j);
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            svd.u.col_mut(j).iter_mut().for_each(|x| *x = -*x);
            svd.v.col_mut(j).iter_mut().for_each(|x| *x = -*x);
        }
    }
    svd
}

/// Eigen-decomposition of a symmetric matrix.
///
/// Eigenvalues come back nonincreasing (stable order on ties) with the
/// matching eigenvectors as columns; each column has its largest-magnitude
/// entry positive.
fn symmetric_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    let eig = nalgebra::SymmetricEigen::new(nalgebra::DMatrix::from_column_slice(n, n, a.data()));
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut out = Matrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let src = eig.eigenvectors.column(i);
        let best = src
            .iter()
            .enumerate()
            .fold(0, |b, (k, x)| if x.abs() > src[b].abs() { k } else { b });
        let sign = if src[best] < 0.0 { -1.0 } else { 1.0 };
        for (dst, x) in out.col_mut(col).iter_mut().zip(src.iter()) {
            *dst = sign * x;
        }
    }
    (order.iter().map(|&i| values[i]).collect(), out)
}

/// Tucker form `core ×₁ U⁽¹⁾ ⋯ ×_d U⁽ᵈ⁾`.
#[derive(Clone, Debug)]
pub struct TuckerFactors {
    pub core: DenseTensor,
    /// `factors[i]` is `n_i × r_i`.
    pub factors: Vec<Matrix>,
    pub rank: RankTuple,
}

impl TuckerFactors {
    /// Shape of the reconstructed tensor.
    pub fn full_shape(&self) -> Result<Shape> {
        Shape::new(self.factors.iter().map(|u| u.rows()).collect::<Vec<_>>())
    }

    fn check(&self) -> Result<()> {
        let core_dims = self.core.shape().dims();
        if core_dims != self.rank.ranks() {
            return invalid(format!(
                "core shape {} does not match rank {}",
                self.core.shape(),
                self.rank
            ));
        }
        if self.factors.len() != core_dims.len() {
            return invalid(format!(
                "{} factors for an order-{} core",
                self.factors.len(),
                core_dims.len()
            ));
        }
        for (i, (u, &r)) in self.factors.iter().zip(core_dims).enumerate() {
            if u.cols() != r {
                return invalid(format!(
                    "factor {i} has {} columns, core needs {r}",
                    u.cols()
                ));
            }
        }
        Ok(())
    }
}

/// Leading `rank[i]` left singular vectors of each unfolding of `x` and the
/// corresponding core.
///
/// The factors are eigenvectors of the mode Gram matrices
/// `unfold(x, i) · unfold(x, i)ᵀ`, which are only `n_i × n_i`. Signs follow
/// the same rule as [`svd_thin`].
pub fn hosvd_truncate(x: &DenseTensor, rank: &RankTuple) -> Result<TuckerFactors> {
    rank.check(x.shape())?;
    let mut factors = Vec::with_capacity(rank.ranks().len());
    for (mode, &r) in rank.ranks().iter().enumerate() {
        let (_, vectors) = symmetric_eigen(&x.mode_gram(mode)?);
        factors.push(vectors.leading_cols(r));
    }
    let mut core = x.clone();
    for (mode, u) in factors.iter().enumerate() {
        core = core.mode_product(&u.transpose(), mode)?;
    }
    Ok(TuckerFactors {
        core,
        factors,
        rank: rank.clone(),
    })
}

/// Applies the factors to the core in ascending mode order.
pub fn reconstruct(t: &TuckerFactors) -> Result<DenseTensor> {
    t.check()?;
    let mut out = t.core.clone();
    for (mode, u) in t.factors.iter().enumerate() {
        out = out.mode_product(u, mode)?;
    }
    Ok(out)
}

/// `H_r(x)`: rank-`r` approximation by truncated HOSVD.
pub fn project_rank_r(x: &DenseTensor, rank: &RankTuple) -> Result<DenseTensor> {
    reconstruct(&hosvd_truncate(x, rank)?)
}

/// `Σ_i Σ_{k>r_i} s_k(unfold(x, i))²`, the standard upper bound on the
/// squared HOSVD truncation error.
pub fn discarded_energy(x: &DenseTensor, rank: &RankTuple) -> Result<f64> {
    rank.check(x.shape())?;
    let mut total = 0.0;
    for (mode, &r) in rank.ranks().iter().enumerate() {
        let svd = svd_thin(&x.unfold(mode)?)?;
        total += svd.s.iter().skip(r).map(|s| s * s).sum::<f64>();
    }
    Ok(total)
}

/// Largest ratio `s_{r_i+1} / s_1` over the unfoldings; zero when every
/// unfolding has rank at most `r_i`.
pub fn rank_excess_ratio(x: &DenseTensor, rank: &RankTuple) -> Result<f64> {
    rank.check(x.shape())?;
    let mut worst: f64 = 0.0;
    for (mode, &r) in rank.ranks().iter().enumerate() {
        let svd = svd_thin(&x.unfold(mode)?)?;
        let lead = svd.s[0];
        if lead == 0.0 {
            continue;
        }
        if let Some(&next) = svd.s.get(r) {
            worst = worst.max(next / lead);
        }
    }
    Ok(worst)
}

/// Random Tucker tensor with Gaussian core and orthonormalized Gaussian
/// factors.
pub fn random_tucker<R: rand::Rng + ?Sized>(
    shape: &Shape,
    rank: &RankTuple,
    rng: &mut R,
) -> Result<TuckerFactors> {
    rank.check(shape)?;
    let core = DenseTensor::random_gaussian(Shape::new(rank.ranks().to_vec())?, rng);
    let factors = shape
        .dims()
        .iter()
        .zip(rank.ranks())
        .map(|(&n, &r)| orthonormalize(&Matrix::random_gaussian(n, r, rng)))
        .collect::<Result<Vec<_>>>()?;
    Ok(TuckerFactors {
        core,
        factors,
        rank: rank.clone(),
    })
}

/// Orthonormal basis for the column space of a full-column-rank matrix
/// (the left singular vectors).
pub fn orthonormalize(m: &Matrix) -> Result<Matrix> {
    let svd = svd_thin(m)?;
    if svd.s.last().copied().unwrap_or(0.0) <= 1e-12 * svd.s[0].max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidArgument("matrix is rank deficient".into()));
    }
    Ok(svd.u.leading_cols(m.cols()))
}
