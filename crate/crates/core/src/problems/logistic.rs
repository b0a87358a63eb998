//! ℓ2-regularized logistic regression over an ℓ1 ball, with a sparse planted
//! signal generator.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{Point, Shape, StructuredPoint};
use crate::model::{HessianOp, SmoothObjective};

/// `log(1 + eᵘ)`, stable for large |u|.
pub(crate) fn log1p_exp(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Design matrix, ±1 labels, and the constraint/regularization constants of
/// `min Σᵢ log(1 + exp(−yᵢ⟨aᵢ, x⟩)) + (ρ/2)‖x‖²  s.t. ‖x‖₁ ≤ τ`.
#[derive(Clone)]
pub struct L1LogisticInstance {
    design: Arc<DMatrix<f64>>,
    labels: Arc<DVector<f64>>,
    pub rho: f64,
    pub tau: f64,
    /// Sparse signal the labels were generated from, for evaluation only.
    pub planted: Option<DVector<f64>>,
}

impl L1LogisticInstance {
    pub fn new(
        design: DMatrix<f64>,
        labels: DVector<f64>,
        rho: f64,
        tau: f64,
    ) -> Result<Self> {
        if design.nrows() != labels.len() {
            return Err(Error::shape(format!(
                "{} design rows vs {} labels",
                design.nrows(),
                labels.len()
            )));
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::invalid("labels must be ±1"));
        }
        if !(rho >= 0.0) || !(tau > 0.0) {
            return Err(Error::invalid("rho must be >= 0 and tau > 0"));
        }
        Ok(L1LogisticInstance {
            design: Arc::new(design),
            labels: Arc::new(labels),
            rho,
            tau,
            planted: None,
        })
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn dim(&self) -> usize {
        self.design.ncols()
    }

    pub fn n_samples(&self) -> usize {
        self.design.nrows()
    }

    /// The smooth part as an objective; `beta2` defaults to the computed
    /// curvature-variation bound of the logistic loss.
    pub fn objective(&self) -> LogisticObjective {
        let gram_top = top_gram_eigenvalue(&self.design);
        // max |σ''| = 1/(6√3); Hessian variation ≤ that times λmax(AᵀA)
        // times the largest row norm.
        let max_row = (0..self.design.nrows())
            .map(|i| self.design.row(i).norm())
            .fold(0.0f64, f64::max);
        let beta2 = gram_top * max_row / (6.0 * 3.0f64.sqrt());
        LogisticObjective {
            design: Arc::clone(&self.design),
            labels: Arc::clone(&self.labels),
            rho: self.rho,
            beta: gram_top / 4.0 + self.rho,
            beta2,
        }
    }
}

fn top_gram_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let gram = a.tr_mul(a);
    gram.symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(0.0f64, f64::max)
}

pub struct LogisticObjective {
    design: Arc<DMatrix<f64>>,
    labels: Arc<DVector<f64>>,
    rho: f64,
    beta: f64,
    beta2: f64,
}

impl LogisticObjective {
    pub fn with_beta2(mut self, beta2: f64) -> Self {
        self.beta2 = beta2;
        self
    }

    fn margins(&self, x: &DVector<f64>) -> DVector<f64> {
        &*self.design * x
    }
}

impl SmoothObjective for LogisticObjective {
    fn shape(&self) -> Shape {
        Shape::Vector(self.design.ncols())
    }

    fn value(&self, x: &Point) -> f64 {
        let x = x.expect_vec();
        let m = self.margins(x);
        let mut acc = 0.0;
        for i in 0..m.len() {
            acc += log1p_exp(-self.labels[i] * m[i]);
        }
        acc + 0.5 * self.rho * x.dot(x)
    }

    fn gradient(&self, x: &Point) -> Point {
        let x = x.expect_vec();
        let m = self.margins(x);
        let mut coeff = DVector::zeros(m.len());
        for i in 0..m.len() {
            let y = self.labels[i];
            coeff[i] = -y * sigmoid(-y * m[i]);
        }
        let mut g = self.design.tr_mul(&coeff);
        g.axpy(self.rho, x, 1.0);
        Point::Vec(g)
    }

    fn hessian_at(&self, x: &Point) -> Box<dyn HessianOp> {
        let m = self.margins(x.expect_vec());
        // σ'(yᵢ mᵢ) yᵢ² = σ(mᵢ)σ(−mᵢ); the sign of the label drops out.
        let weights = DVector::from_fn(m.len(), |i, _| sigmoid(m[i]) * sigmoid(-m[i]));
        Box::new(LogisticHessian {
            design: Arc::clone(&self.design),
            weights,
            rho: self.rho,
        })
    }

    fn beta2(&self) -> f64 {
        self.beta2
    }

    fn alpha(&self) -> Option<f64> {
        (self.rho > 0.0).then_some(self.rho)
    }

    fn beta(&self) -> Option<f64> {
        Some(self.beta)
    }
}

/// `v ↦ Aᵀ(d ⊙ (Av)) + ρv`; a sparse `v` touches only its support's columns
/// in the forward product.
struct LogisticHessian {
    design: Arc<DMatrix<f64>>,
    weights: DVector<f64>,
    rho: f64,
}

impl LogisticHessian {
    fn backward(&self, mut forward: DVector<f64>, v: &DVector<f64>) -> Point {
        for i in 0..forward.len() {
            forward[i] *= self.weights[i];
        }
        let mut out = self.design.tr_mul(&forward);
        out.axpy(self.rho, v, 1.0);
        Point::Vec(out)
    }
}

impl HessianOp for LogisticHessian {
    fn apply_dense(&self, v: &Point) -> Point {
        let v = v.expect_vec();
        self.backward(&*self.design * v, v)
    }

    fn apply(&self, v: &StructuredPoint) -> Point {
        match v {
            StructuredPoint::Sparse(sv) => {
                let mut forward = DVector::zeros(self.design.nrows());
                for &(j, x) in sv.entries() {
                    forward.axpy(x, &self.design.column(j), 1.0);
                }
                self.backward(forward, &sv.to_dense())
            }
            other => self.apply_dense(&other.densify()),
        }
    }
}

/// Synthetic ℓ1-constrained logistic instance with an `s`-sparse planted
/// signal of ℓ1 norm `tau`; labels are drawn from the logistic model at the
/// planted margins. Streams: 0 = design+signal, 2 = labels.
pub fn gen_l1_logistic(
    n: usize,
    n_samples: usize,
    s: usize,
    tau: f64,
    rho: f64,
    feature_scale: f64,
    seed: u64,
) -> Result<L1LogisticInstance> {
    if s == 0 || s > n {
        return Err(Error::invalid(format!("sparsity {s} out of range for n = {n}")));
    }
    if !(tau > 0.0) || !(rho >= 0.0) || !(feature_scale > 0.0) {
        return Err(Error::invalid("tau, feature_scale must be > 0 and rho >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let design = DMatrix::from_fn(n_samples, n, |_, _| {
        feature_scale * StandardNormal.sample(&mut rng)
    });

    let mut support: Vec<usize> = (0..n).collect();
    support.shuffle(&mut rng);
    support.truncate(s);
    support.sort_unstable();
    let mut signal = DVector::zeros(n);
    let mut raw: Vec<f64> = Vec::with_capacity(s);
    for _ in 0..s {
        let sign = if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 };
        raw.push(sign * (0.5 + rng.random::<f64>()));
    }
    let l1: f64 = raw.iter().map(|v| v.abs()).sum();
    for (k, &j) in support.iter().enumerate() {
        signal[j] = raw[k] / l1 * tau;
    }

    rng.set_stream(2);
    let margins = &design * &signal;
    let labels = DVector::from_fn(n_samples, |i, _| {
        if rng.random::<f64>() < sigmoid(margins[i]) {
            1.0
        } else {
            -1.0
        }
    });

    let mut inst = L1LogisticInstance::new(design, labels, rho, tau)?;
    inst.planted = Some(signal);
    Ok(inst)
}
