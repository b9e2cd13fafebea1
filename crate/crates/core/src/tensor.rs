//! Dense order-`d` tensors stored column-major (first index fastest).
//!
//! Modes are zero-based throughout the API: mode `0` is the first index.
//! The mode-`k` unfolding places index `k` on the rows and orders the
//! remaining indices column-major with lower-numbered modes varying fastest,
//! so `fold(unfold(x, k), k, shape) == x` bit for bit.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
}

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() {
            return invalid("tensor order must be at least 1");
        }
        if let Some(pos) = dims.iter().position(|&n| n == 0) {
            return invalid(format!("dimension {pos} is zero"));
        }
        let mut len: usize = 1;
        for &n in &dims {
            len = match len.checked_mul(n) {
                Some(v) => v,
                None => return invalid("element count overflows usize"),
            };
        }
        if len > isize::MAX as usize / std::mem::size_of::<f64>() {
            return invalid("element count exceeds addressable memory");
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Tensor order `d`.
    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Element count `N = ∏ n_i`.
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self, mode: usize) -> usize {
        self.dims[mode]
    }

    /// Largest mode dimension.
    pub fn max_dim(&self) -> usize {
        self.dims.iter().copied().max().unwrap_or(1)
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return invalid(format!(
                "mode {mode} out of range for an order-{} tensor",
                self.order()
            ));
        }
        Ok(())
    }

    /// `(∏_{i<mode} n_i, n_mode, ∏_{i>mode} n_i)`.
    fn split(&self, mode: usize) -> (usize, usize, usize) {
        let left = self.dims[..mode].iter().product();
        let right = self.dims[mode + 1..].iter().product();
        (left, self.dims[mode], right)
    }

    fn with_dim(&self, mode: usize, n: usize) -> Shape {
        let mut dims = self.dims.clone();
        dims[mode] = n;
        Shape { dims }
    }

    /// Flat column-major offset of a multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.order());
        let mut off = 0;
        let mut stride = 1;
        for (&i, &n) in index.iter().zip(&self.dims) {
            debug_assert!(i < n);
            off += i * stride;
            stride *= n;
        }
        off
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Tucker rank `(r_1, …, r_d)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RankTuple {
    ranks: Vec<usize>,
}

impl RankTuple {
    pub fn new(ranks: impl Into<Vec<usize>>) -> Result<Self> {
        let ranks = ranks.into();
        if ranks.is_empty() {
            return invalid("rank tuple is empty");
        }
        if ranks.contains(&0) {
            return invalid("rank components must be at least 1");
        }
        Ok(Self { ranks })
    }

    /// Builds a rank tuple and checks `1 <= r_i <= n_i` against `shape`.
    pub fn for_shape(ranks: impl Into<Vec<usize>>, shape: &Shape) -> Result<Self> {
        let r = Self::new(ranks)?;
        r.check(shape)?;
        Ok(r)
    }

    /// Full rank of `shape`.
    pub fn full(shape: &Shape) -> Self {
        Self {
            ranks: shape.dims().to_vec(),
        }
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn max_rank(&self) -> usize {
        self.ranks.iter().copied().max().unwrap_or(1)
    }

    pub fn check(&self, shape: &Shape) -> Result<()> {
        if self.ranks.len() != shape.order() {
            return invalid(format!(
                "rank {self} has {} components but the tensor has order {}",
                self.ranks.len(),
                shape.order()
            ));
        }
        for (i, (&r, &n)) in self.ranks.iter().zip(shape.dims()).enumerate() {
            if r > n {
                return invalid(format!("rank component {i} is {r} but dimension is {n}"));
            }
        }
        Ok(())
    }

    /// Componentwise `min(k·r_i, n_i)`; `k = 3` gives the rank class of the
    /// convergence theorem.
    pub fn scaled_clipped(&self, k: usize, shape: &Shape) -> Self {
        let ranks = self
            .ranks
            .iter()
            .zip(shape.dims())
            .map(|(&r, &n)| (k * r).min(n))
            .collect();
        Self { ranks }
    }
}

impl fmt::Display for RankTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.ranks.iter().map(|d| d.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Dense real matrix, column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return invalid(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of rows. Panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m.data[i + j * rows] = f(i, j);
            }
        }
        m
    }

    pub fn random_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.rows]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i + j * self.rows] = v;
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return invalid(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for k in 0..self.cols {
                let b = other.get(k, j);
                if b == 0.0 {
                    continue;
                }
                let a = &self.data[k * self.rows..(k + 1) * self.rows];
                for (d, &a) in dst.iter_mut().zip(a) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// First `k` columns.
    pub fn leading_cols(&self, k: usize) -> Matrix {
        let k = k.min(self.cols);
        Matrix {
            rows: self.rows,
            cols: k,
            data: self.data[..k * self.rows].to_vec(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `max |(QᵀQ − I)_{ij}|`, the deviation of the columns from orthonormality.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.cols {
            for b in a..self.cols {
                let dot: f64 = self.col(a).iter().zip(self.col(b)).map(|(x, y)| x * y).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    /// Wraps flat column-major data. Rejects wrong lengths and non-finite
    /// entries.
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return invalid(format!(
                "tensor data has {} entries but shape {shape} needs {}",
                data.len(),
                shape.len()
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return invalid(format!("entry {pos} is not finite"));
        }
        Ok(Self { shape, data })
    }

    /// Internal constructor for results of finite arithmetic on valid tensors.
    pub(crate) fn from_parts(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), shape.len());
        Self { shape, data }
    }

    pub fn zeros(shape: Shape) -> Self {
        let data = vec![0.0; shape.len()];
        Self { shape, data }
    }

    /// Fills each entry from its zero-based multi-index.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let d = shape.order();
        let mut index = vec![0usize; d];
        let mut data = Vec::with_capacity(shape.len());
        for _ in 0..shape.len() {
            data.push(f(&index));
            for k in 0..d {
                index[k] += 1;
                if index[k] < shape.dim(k) {
                    break;
                }
                index[k] = 0;
            }
        }
        Self { shape, data }
    }

    /// I.i.d. standard normal entries.
    pub fn random_gaussian<R: Rng + ?Sized>(shape: Shape, rng: &mut R) -> Self {
        let data = (0..shape.len()).map(|_| rng.sample(StandardNormal)).collect();
        Self { shape, data }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.shape.offset(index)]
    }

    /// `vec(X)`: identical to the flat column-major storage.
    pub fn vectorize(&self) -> Vec<f64> {
        self.data.clone()
    }

    pub fn devectorize(v: Vec<f64>, shape: Shape) -> Result<Self> {
        Self::new(shape, v)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Mode-`mode` matricization, `n_mode × N/n_mode`.
    pub fn unfold(&self, mode: usize) -> Result<Matrix> {
        self.shape.check_mode(mode)?;
        let (left, n, right) = self.shape.split(mode);
        let cols = left * right;
        let mut out = vec![0.0; n * cols];
        for r in 0..right {
            for j in 0..n {
                let src = &self.data[left * (j + n * r)..left * (j + n * r + 1)];
                for (l, &v) in src.iter().enumerate() {
                    out[j + n * (l + left * r)] = v;
                }
            }
        }
        Ok(Matrix {
            rows: n,
            cols,
            data: out,
        })
    }

    /// Inverse of [`DenseTensor::unfold`].
    pub fn fold(mat: &Matrix, mode: usize, shape: &Shape) -> Result<Self> {
        shape.check_mode(mode)?;
        let (left, n, right) = shape.split(mode);
        if mat.rows != n || mat.cols != left * right {
            return invalid(format!(
                "cannot fold a {}x{} matrix along mode {mode} into shape {shape}",
                mat.rows, mat.cols
            ));
        }
        let mut data = vec![0.0; shape.len()];
        for r in 0..right {
            for j in 0..n {
                let dst = &mut data[left * (j + n * r)..left * (j + n * r + 1)];
                for (l, d) in dst.iter_mut().enumerate() {
                    *d = mat.data[j + n * (l + left * r)];
                }
            }
        }
        Ok(Self {
            shape: shape.clone(),
            data,
        })
    }

    /// `⟨self, other⟩ = vec(other)ᵀ vec(self)`.
    pub fn inner(&self, other: &DenseTensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn frobenius_norm(&self) -> f64 {
        dot(&self.data, &self.data).sqrt()
    }

    /// `unfold(mode) · unfold(mode)ᵀ`, computed without forming the unfolding.
    pub fn mode_gram(&self, mode: usize) -> Result<Matrix> {
        self.shape.check_mode(mode)?;
        let (left, n, right) = self.shape.split(mode);
        let mut g = vec![0.0; n * n];
        if left == 1 {
            for col in self.data.chunks_exact(n) {
                for k in 0..n {
                    for j in 0..=k {
                        g[j + n * k] += col[j] * col[k];
                    }
                }
            }
        } else {
            for r in 0..right {
                let block = &self.data[left * n * r..left * n * (r + 1)];
                for j in 0..n {
                    let a = &block[left * j..left * (j + 1)];
                    for k in j..n {
                        g[j + n * k] += dot(a, &block[left * k..left * (k + 1)]);
                    }
                }
            }
        }
        for j in 0..n {
            for k in j + 1..n {
                g[k + n * j] = g[j + n * k];
            }
        }
        Ok(Matrix {
            rows: n,
            cols: n,
            data: g,
        })
    }

    /// Mode-`mode` product `self ×_mode u` for `u` of size `k × n_mode`.
    pub fn mode_product(&self, u: &Matrix, mode: usize) -> Result<DenseTensor> {
        self.shape.check_mode(mode)?;
        let (left, n, right) = self.shape.split(mode);
        if u.cols != n {
            return invalid(format!(
                "mode-{mode} product needs {n} matrix columns, got {}",
                u.cols
            ));
        }
        let k = u.rows;
        let shape = self.shape.with_dim(mode, k);
        let mut out = vec![0.0; left * k * right];
        if left == 1 {
            for (src, dst) in self.data.chunks_exact(n).zip(out.chunks_exact_mut(k)) {
                for (j, &s) in src.iter().enumerate() {
                    for (d, &w) in dst.iter_mut().zip(&u.data[j * k..(j + 1) * k]) {
                        *d += w * s;
                    }
                }
            }
            return Ok(DenseTensor { shape, data: out });
        }
        for r in 0..right {
            for j in 0..n {
                let src = &self.data[left * (j + n * r)..left * (j + n * r + 1)];
                for q in 0..k {
                    let w = u.data[q + j * k];
                    if w == 0.0 {
                        continue;
                    }
                    let dst = &mut out[left * (q + k * r)..left * (q + k * r + 1)];
                    for (d, &s) in dst.iter_mut().zip(src) {
                        *d += w * s;
                    }
                }
            }
        }
        Ok(DenseTensor { shape, data: out })
    }

    pub fn scaled(&self, alpha: f64) -> DenseTensor {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    /// `self + alpha · other`.
    pub fn add_scaled(&self, alpha: f64, other: &DenseTensor) -> Result<DenseTensor> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        self.add_scaled(-1.0, other)
    }

    /// `‖self − other‖_F`.
    pub fn distance(&self, other: &DenseTensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    pub fn max_abs_diff(&self, other: &DenseTensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    fn check_same_shape(&self, other: &DenseTensor) -> Result<()> {
        if self.shape != other.shape {
            return invalid(format!(
                "shape mismatch: {} vs {}",
                self.shape, other.shape
            ));
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
