//! Structured vector/matrix representations and numerical kernels.
//!
//! Solvers in this crate operate on two ambient spaces (`ℝⁿ` and `ℝ^{m×n}`),
//! represented uniformly by [`Point`]. Candidate steps produced by the weak
//! proximal oracles additionally carry a *structured* form ([`SparseVec`] or
//! [`LowRankMat`]) so that Hessian products can exploit sparsity or low rank.

mod svd;
mod topk;

pub use svd::{full_svd, truncated_svd, SvdCall, SvdFactors, DENSE_SVD_CUTOFF};
pub use topk::{top_k_abs, top_k_signed};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of an ambient-space element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    Vector(usize),
    Matrix(usize, usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Vector(n) => n,
            Shape::Matrix(m, n) => m * n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Shape::Vector(n) => write!(f, "vector({n})"),
            Shape::Matrix(m, n) => write!(f, "matrix({m}x{n})"),
        }
    }
}

/// A dense point in one of the two ambient spaces.
///
/// All arithmetic helpers require matching shapes and panic otherwise;
/// public solver entry points validate shapes up front and surface
/// [`Error::ShapeMismatch`] instead.
#[derive(Clone, Debug, PartialEq)]
pub enum Point {
    Vec(DVector<f64>),
    Mat(DMatrix<f64>),
}

impl Point {
    pub fn zeros(shape: Shape) -> Point {
        match shape {
            Shape::Vector(n) => Point::Vec(DVector::zeros(n)),
            Shape::Matrix(m, n) => Point::Mat(DMatrix::zeros(m, n)),
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            Point::Vec(v) => Shape::Vector(v.len()),
            Point::Mat(m) => Shape::Matrix(m.nrows(), m.ncols()),
        }
    }

    fn flat(&self) -> &[f64] {
        match self {
            Point::Vec(v) => v.as_slice(),
            Point::Mat(m) => m.as_slice(),
        }
    }

    fn flat_mut(&mut self) -> &mut [f64] {
        match self {
            Point::Vec(v) => v.as_mut_slice(),
            Point::Mat(m) => m.as_mut_slice(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.flat().iter().all(|x| x.is_finite())
    }

    pub fn norm_squared(&self) -> f64 {
        self.flat().iter().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn dot(&self, other: &Point) -> f64 {
        assert_eq!(self.shape(), other.shape(), "Point::dot shape mismatch");
        self.flat()
            .iter()
            .zip(other.flat())
            .map(|(a, b)| a * b)
            .sum()
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &Point) {
        assert_eq!(self.shape(), other.shape(), "Point::axpy shape mismatch");
        for (x, y) in self.flat_mut().iter_mut().zip(other.flat()) {
            *x += a * y;
        }
    }

    pub fn scale_mut(&mut self, a: f64) {
        for x in self.flat_mut() {
            *x *= a;
        }
    }

    /// `self = (1 - lambda) * self + lambda * w`.
    pub fn lerp_mut(&mut self, lambda: f64, w: &Point) {
        assert_eq!(self.shape(), w.shape(), "Point::lerp_mut shape mismatch");
        for (x, y) in self.flat_mut().iter_mut().zip(w.flat()) {
            *x = (1.0 - lambda) * *x + lambda * y;
        }
    }

    pub fn sub(&self, other: &Point) -> Point {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn add_scaled(&self, a: f64, other: &Point) -> Point {
        let mut out = self.clone();
        out.axpy(a, other);
        out
    }

    /// `self += a * w` for a structured `w`, touching only its support when
    /// `w` is sparse.
    pub fn add_structured(&mut self, a: f64, w: &StructuredPoint) {
        match w {
            StructuredPoint::Dense(p) => self.axpy(a, p),
            StructuredPoint::Sparse(sv) => {
                let v = match self {
                    Point::Vec(v) => v,
                    Point::Mat(_) => panic!("sparse vector added to matrix point"),
                };
                assert_eq!(v.len(), sv.dim(), "sparse add dimension mismatch");
                for &(i, x) in sv.entries() {
                    v[i] += a * x;
                }
            }
            StructuredPoint::LowRank(lr) => {
                let m = match self {
                    Point::Mat(m) => m,
                    Point::Vec(_) => panic!("low-rank matrix added to vector point"),
                };
                lr.add_to_dense(a, m);
            }
        }
    }

    pub fn as_vec(&self) -> Option<&DVector<f64>> {
        match self {
            Point::Vec(v) => Some(v),
            Point::Mat(_) => None,
        }
    }

    pub fn as_mat(&self) -> Option<&DMatrix<f64>> {
        match self {
            Point::Mat(m) => Some(m),
            Point::Vec(_) => None,
        }
    }

    pub fn expect_vec(&self) -> &DVector<f64> {
        self.as_vec().expect("expected a vector-shaped point")
    }

    pub fn expect_mat(&self) -> &DMatrix<f64> {
        self.as_mat().expect("expected a matrix-shaped point")
    }
}

impl From<DVector<f64>> for Point {
    fn from(v: DVector<f64>) -> Self {
        Point::Vec(v)
    }
}

impl From<DMatrix<f64>> for Point {
    fn from(m: DMatrix<f64>) -> Self {
        Point::Mat(m)
    }
}

/// Sparse vector as strictly increasing `(index, value)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVec {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVec {
    /// Entries must have strictly increasing indices in `[0, dim)` and
    /// nonzero finite values.
    pub fn new(dim: usize, entries: Vec<(usize, f64)>) -> Result<Self> {
        if entries.len() > dim {
            return Err(Error::invalid(format!(
                "sparse vector with {} entries exceeds dimension {}",
                entries.len(),
                dim
            )));
        }
        let mut prev: Option<usize> = None;
        for &(i, v) in &entries {
            if i >= dim {
                return Err(Error::invalid(format!(
                    "sparse index {i} out of range for dimension {dim}"
                )));
            }
            if let Some(p) = prev {
                if i <= p {
                    return Err(Error::invalid(
                        "sparse indices must be strictly increasing".to_string(),
                    ));
                }
            }
            if v == 0.0 || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "sparse value at index {i} must be nonzero and finite, got {v}"
                )));
            }
            prev = Some(i);
        }
        Ok(SparseVec { dim, entries })
    }

    /// Builds from parallel index/value slices, dropping exact zeros.
    pub fn from_support(dim: usize, indices: &[usize], values: &[f64]) -> Result<Self> {
        assert_eq!(indices.len(), values.len());
        let mut pairs: Vec<(usize, f64)> = indices
            .iter()
            .copied()
            .zip(values.iter().copied())
            .filter(|&(_, v)| v != 0.0)
            .collect();
        pairs.sort_unstable_by_key(|&(i, _)| i);
        SparseVec::new(dim, pairs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn to_dense(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim);
        for &(i, x) in &self.entries {
            v[i] = x;
        }
        v
    }

    pub fn dot_dense(&self, v: &DVector<f64>) -> f64 {
        assert_eq!(self.dim, v.len(), "SparseVec::dot_dense dimension mismatch");
        self.entries.iter().map(|&(i, x)| x * v[i]).sum()
    }

    pub fn norm_squared(&self) -> f64 {
        self.entries.iter().map(|&(_, x)| x * x).sum()
    }
}

/// Rank-`s` matrix held as truncated SVD factors `left * diag(singulars) * rightᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LowRankMat {
    left: DMatrix<f64>,
    singulars: DVector<f64>,
    right: DMatrix<f64>,
}

/// Orthonormality slack admitted by [`LowRankMat::new`].
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

impl LowRankMat {
    /// `left` is `m×s`, `right` is `n×s`, both column-orthonormal within
    /// `1e-10`; `singulars` must be nonnegative and nonincreasing.
    pub fn new(left: DMatrix<f64>, singulars: DVector<f64>, right: DMatrix<f64>) -> Result<Self> {
        let s = singulars.len();
        if left.ncols() != s || right.ncols() != s {
            return Err(Error::shape(format!(
                "factor widths {}/{} do not match {} singular values",
                left.ncols(),
                right.ncols(),
                s
            )));
        }
        for j in 0..s {
            let sv = singulars[j];
            if !(sv >= 0.0) || !sv.is_finite() {
                return Err(Error::invalid(format!(
                    "singular value {sv} is negative or non-finite"
                )));
            }
            if j > 0 && singulars[j - 1] < sv {
                return Err(Error::invalid(
                    "singular values must be nonincreasing".to_string(),
                ));
            }
        }
        for (name, f) in [("left", &left), ("right", &right)] {
            let gram = f.transpose() * f;
            for i in 0..s {
                for j in 0..s {
                    let target = if i == j { 1.0 } else { 0.0 };
                    if (gram[(i, j)] - target).abs() > ORTHONORMALITY_TOL {
                        return Err(Error::invalid(format!(
                            "{name} factor is not column-orthonormal: gram[{i},{j}] = {}",
                            gram[(i, j)]
                        )));
                    }
                }
            }
        }
        Ok(LowRankMat {
            left,
            singulars,
            right,
        })
    }

    pub fn nrows(&self) -> usize {
        self.left.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.right.nrows()
    }

    pub fn rank(&self) -> usize {
        self.singulars.len()
    }

    pub fn left(&self) -> &DMatrix<f64> {
        &self.left
    }

    pub fn singulars(&self) -> &DVector<f64> {
        &self.singulars
    }

    pub fn right(&self) -> &DMatrix<f64> {
        &self.right
    }

    /// Replaces the singular values, keeping the factors. The replacement
    /// must satisfy the same ordering/nonnegativity invariant.
    pub fn with_singulars(&self, singulars: DVector<f64>) -> Result<Self> {
        LowRankMat::new(self.left.clone(), singulars, self.right.clone())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows(), self.ncols());
        self.add_to_dense(1.0, &mut out);
        out
    }

    /// `out += a * self`, in `O(m n s)`.
    pub fn add_to_dense(&self, a: f64, out: &mut DMatrix<f64>) {
        assert_eq!(out.nrows(), self.nrows());
        assert_eq!(out.ncols(), self.ncols());
        for k in 0..self.rank() {
            let c = a * self.singulars[k];
            if c == 0.0 {
                continue;
            }
            let u = self.left.column(k);
            let v = self.right.column(k);
            for j in 0..self.ncols() {
                let cv = c * v[j];
                let mut col = out.column_mut(j);
                for i in 0..self.nrows() {
                    col[i] += cv * u[i];
                }
            }
        }
    }

    /// Entry `(i, j)` of the reconstructed matrix, in `O(s)`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.rank() {
            acc += self.singulars[k] * self.left[(i, k)] * self.right[(j, k)];
        }
        acc
    }

    /// Frobenius norm; equals `‖singulars‖₂` thanks to orthonormal factors.
    pub fn fro_norm(&self) -> f64 {
        self.singulars.norm()
    }
}

/// A candidate point in either dense or structure-exploiting form.
#[derive(Clone, Debug, PartialEq)]
pub enum StructuredPoint {
    Dense(Point),
    Sparse(SparseVec),
    LowRank(LowRankMat),
}

impl StructuredPoint {
    pub fn shape(&self) -> Shape {
        match self {
            StructuredPoint::Dense(p) => p.shape(),
            StructuredPoint::Sparse(sv) => Shape::Vector(sv.dim()),
            StructuredPoint::LowRank(lr) => Shape::Matrix(lr.nrows(), lr.ncols()),
        }
    }

    pub fn densify(&self) -> Point {
        match self {
            StructuredPoint::Dense(p) => p.clone(),
            StructuredPoint::Sparse(sv) => Point::Vec(sv.to_dense()),
            StructuredPoint::LowRank(lr) => Point::Mat(lr.to_dense()),
        }
    }

    /// Number of nonzeros (sparse) or retained rank (low-rank); dense points
    /// report their full length.
    pub fn structure_size(&self) -> usize {
        match self {
            StructuredPoint::Dense(p) => p.shape().len(),
            StructuredPoint::Sparse(sv) => sv.nnz(),
            StructuredPoint::LowRank(lr) => lr.rank(),
        }
    }

    /// `⟨self, p⟩` without densifying sparse operands.
    pub fn dot_point(&self, p: &Point) -> f64 {
        match self {
            StructuredPoint::Dense(q) => q.dot(p),
            StructuredPoint::Sparse(sv) => sv.dot_dense(p.expect_vec()),
            StructuredPoint::LowRank(lr) => {
                let mat = p.expect_mat();
                assert_eq!((lr.nrows(), lr.ncols()), mat.shape());
                let mut acc = 0.0;
                for k in 0..lr.rank() {
                    let pu = mat.tr_mul(&lr.left().column(k));
                    acc += lr.singulars()[k] * pu.dot(&lr.right().column(k));
                }
                acc
            }
        }
    }

    pub fn norm_squared(&self) -> f64 {
        match self {
            StructuredPoint::Dense(p) => p.norm_squared(),
            StructuredPoint::Sparse(sv) => sv.norm_squared(),
            StructuredPoint::LowRank(lr) => {
                let s = lr.singulars();
                s.dot(s)
            }
        }
    }
}

/// Rejects non-finite entries at solver boundaries.
pub fn ensure_finite(p: &Point, what: &str) -> Result<()> {
    if p.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} contains NaN or Inf entries")))
    }
}
