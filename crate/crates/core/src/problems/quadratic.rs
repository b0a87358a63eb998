//! Quadratic objectives with planted optima, used as solver test oracles.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{Point, Shape, StructuredPoint};
use crate::model::{HessianOp, SmoothObjective};

/// `f(x) = ½⟨x, Ax⟩ − ⟨b, x⟩` with symmetric positive semidefinite `A`.
///
/// Extremal eigenvalues are computed once at construction so solvers get
/// exact `α`/`β` constants.
pub struct QuadraticObjective {
    a: Arc<DMatrix<f64>>,
    b: DVector<f64>,
    min_eig: f64,
    max_eig: f64,
    beta2: f64,
    beta_override: Option<f64>,
}

impl QuadraticObjective {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let n = b.len();
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::shape(format!(
                "quadratic matrix {}x{} vs vector length {}",
                a.nrows(),
                a.ncols(),
                n
            )));
        }
        let asym = (&a - a.transpose()).norm();
        if asym > 1e-10 * (1.0 + a.norm()) {
            return Err(Error::invalid("quadratic matrix must be symmetric"));
        }
        if a.iter().any(|x| !x.is_finite()) || b.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("quadratic data must be finite"));
        }
        let eigs = a.clone().symmetric_eigen().eigenvalues;
        let min_eig = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_eig = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if min_eig < -1e-10 * (1.0 + max_eig.abs()) {
            return Err(Error::invalid(format!(
                "quadratic matrix must be positive semidefinite (min eigenvalue {min_eig})"
            )));
        }
        Ok(QuadraticObjective {
            a: Arc::new(a),
            b,
            min_eig: min_eig.max(0.0),
            max_eig: max_eig.max(0.0),
            beta2: 0.0,
            beta_override: None,
        })
    }

    /// Chooses `b = A x_opt` so that `∇f(x_opt) = 0`.
    pub fn with_planted_optimum(a: DMatrix<f64>, x_opt: &DVector<f64>) -> Result<Self> {
        let b = &a * x_opt;
        QuadraticObjective::new(a, b)
    }

    /// Overrides the reported Hessian Lipschitz constant (any upper bound on
    /// the true value, which is zero, is admissible).
    pub fn with_beta2(mut self, beta2: f64) -> Self {
        self.beta2 = beta2;
        self
    }

    /// Overrides the reported gradient Lipschitz constant.
    pub fn with_beta_override(mut self, beta: f64) -> Self {
        self.beta_override = Some(beta);
        self
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn linear_term(&self) -> &DVector<f64> {
        &self.b
    }

    /// Unconstrained minimizer `A⁻¹ b` via Cholesky; requires `A ≻ 0`.
    pub fn unconstrained_minimizer(&self) -> Result<DVector<f64>> {
        self.a
            .clone_owned()
            .cholesky()
            .map(|ch| ch.solve(&self.b))
            .ok_or_else(|| Error::numerical("quadratic matrix is not positive definite"))
    }
}

impl SmoothObjective for QuadraticObjective {
    fn shape(&self) -> Shape {
        Shape::Vector(self.b.len())
    }

    fn value(&self, x: &Point) -> f64 {
        let x = x.expect_vec();
        0.5 * x.dot(&(&*self.a * x)) - self.b.dot(x)
    }

    fn gradient(&self, x: &Point) -> Point {
        let x = x.expect_vec();
        Point::Vec(&*self.a * x - &self.b)
    }

    fn hessian_at(&self, _x: &Point) -> Box<dyn HessianOp> {
        Box::new(DenseMatHessian {
            a: Arc::clone(&self.a),
        })
    }

    fn beta2(&self) -> f64 {
        self.beta2
    }

    fn alpha(&self) -> Option<f64> {
        (self.min_eig > 0.0).then_some(self.min_eig)
    }

    fn beta(&self) -> Option<f64> {
        Some(self.beta_override.unwrap_or(self.max_eig))
    }
}

/// Constant Hessian given by an explicit symmetric matrix. Sparse operands
/// cost `O(n · nnz)` via column accumulation.
struct DenseMatHessian {
    a: Arc<DMatrix<f64>>,
}

impl HessianOp for DenseMatHessian {
    fn apply_dense(&self, v: &Point) -> Point {
        Point::Vec(&*self.a * v.expect_vec())
    }

    fn apply(&self, v: &StructuredPoint) -> Point {
        match v {
            StructuredPoint::Sparse(sv) => {
                let mut out = DVector::zeros(self.a.nrows());
                for &(j, x) in sv.entries() {
                    out.axpy(x, &self.a.column(j), 1.0);
                }
                Point::Vec(out)
            }
            other => self.apply_dense(&other.densify()),
        }
    }
}

/// Separable quadratic on matrix space: `f(X) = ½ Σ w_ij (X − T)_ij²`
/// with entrywise weights `w ≥ 0`. Its Hessian is the elementwise multiplier
/// `V ↦ w ⊙ V`.
pub struct MatrixQuadratic {
    weights: Arc<DMatrix<f64>>,
    target: DMatrix<f64>,
    min_w: f64,
    max_w: f64,
    beta2: f64,
}

impl MatrixQuadratic {
    pub fn new(weights: DMatrix<f64>, target: DMatrix<f64>) -> Result<Self> {
        if weights.shape() != target.shape() {
            return Err(Error::shape("weights vs target".into()));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("weights must be nonnegative and finite"));
        }
        let min_w = weights.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_w = weights.iter().cloned().fold(0.0f64, f64::max);
        Ok(MatrixQuadratic {
            weights: Arc::new(weights),
            target,
            min_w,
            max_w,
            beta2: 0.0,
        })
    }

    pub fn uniform(m: usize, n: usize, weight: f64, target: DMatrix<f64>) -> Result<Self> {
        MatrixQuadratic::new(DMatrix::from_element(m, n, weight), target)
    }

    pub fn with_beta2(mut self, beta2: f64) -> Self {
        self.beta2 = beta2;
        self
    }

    pub fn target(&self) -> &DMatrix<f64> {
        &self.target
    }
}

impl SmoothObjective for MatrixQuadratic {
    fn shape(&self) -> Shape {
        Shape::Matrix(self.target.nrows(), self.target.ncols())
    }

    fn value(&self, x: &Point) -> f64 {
        let x = x.expect_mat();
        let mut acc = 0.0;
        for (xi, (wi, ti)) in x.iter().zip(self.weights.iter().zip(self.target.iter())) {
            let d = xi - ti;
            acc += wi * d * d;
        }
        0.5 * acc
    }

    fn gradient(&self, x: &Point) -> Point {
        let x = x.expect_mat();
        let mut g = x - &self.target;
        g.zip_apply(&*self.weights, |gi, wi| *gi *= wi);
        Point::Mat(g)
    }

    fn hessian_at(&self, _x: &Point) -> Box<dyn HessianOp> {
        Box::new(ElementwiseHessian {
            weights: Arc::clone(&self.weights),
        })
    }

    fn beta2(&self) -> f64 {
        self.beta2
    }

    fn alpha(&self) -> Option<f64> {
        (self.min_w > 0.0).then_some(self.min_w)
    }

    fn beta(&self) -> Option<f64> {
        Some(self.max_w)
    }
}

struct ElementwiseHessian {
    weights: Arc<DMatrix<f64>>,
}

impl HessianOp for ElementwiseHessian {
    fn apply_dense(&self, v: &Point) -> Point {
        let v = v.expect_mat();
        let mut out = v.clone();
        out.zip_apply(&*self.weights, |oi, wi| *oi *= wi);
        Point::Mat(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SparseVec;
    use approx::assert_relative_eq;

    #[test]
    fn planted_optimum_has_zero_gradient() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let x_opt = DVector::from_vec(vec![0.3, -0.2]);
        let obj = QuadraticObjective::with_planted_optimum(a, &x_opt).unwrap();
        let g = obj.gradient(&Point::Vec(x_opt.clone()));
        assert!(g.norm() < 1e-14);
        let sol = obj.unconstrained_minimizer().unwrap();
        assert!((sol - x_opt).norm() < 1e-12);
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.0, 1.0]);
        assert!(QuadraticObjective::new(asym, DVector::zeros(2)).is_err());
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(QuadraticObjective::new(indef, DVector::zeros(2)).is_err());
    }

    #[test]
    fn sparse_hessian_apply_matches_dense() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let obj = QuadraticObjective::new(a, DVector::zeros(3)).unwrap();
        let h = obj.hessian_at(&Point::Vec(DVector::zeros(3)));
        let sv = SparseVec::new(3, vec![(0, 2.0), (2, -1.0)]).unwrap();
        let via_sparse = h.apply(&StructuredPoint::Sparse(sv.clone()));
        let via_dense = h.apply_dense(&Point::Vec(sv.to_dense()));
        assert!(via_sparse.sub(&via_dense).norm() < 1e-12);
    }

    #[test]
    fn matrix_quadratic_gradient_and_bounds() {
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let t = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.5]);
        let obj = MatrixQuadratic::new(w, t.clone()).unwrap();
        assert_eq!(obj.alpha(), Some(1.0));
        assert_eq!(obj.beta(), Some(4.0));
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let g = obj.gradient(&Point::Mat(x.clone()));
        let gm = g.expect_mat();
        assert_relative_eq!(gm[(0, 0)], 1.0);
        assert_relative_eq!(gm[(1, 0)], 3.0);
        assert_relative_eq!(gm[(1, 1)], -2.0);
        assert_relative_eq!(obj.value(&Point::Mat(t)), 0.0);
    }
}
