//! Smooth objectives and the frozen second-order model.
//!
//! A [`ProximalModel`] freezes `∇f(x_t)` and the Hessian operator at an outer
//! iterate `x_t` and exposes the differential part of the subproblem,
//!
//! ```text
//! Q(w)  = ⟨w − x, ∇f(x)⟩ + (η/2)⟨w − x, ∇²f(x)(w − x)⟩
//! Qʳ(w) = Q(w) + (η²β₂/6)‖w − x‖³
//! ```
//!
//! together with an incremental gradient recurrence: after the inner update
//! `y ← (1−λ)y + λw` with structured `w`, the new model gradient is obtained
//! from a single Hessian product against `w` plus `O(n)` (or `O(mn)`) vector
//! work, never a dense Hessian product. The cubic-term gradient of `Qʳ` is
//! not expressible through the recurrence and is recomputed densely on read.

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, Point, Shape, StructuredPoint};

/// Value/gradient/Hessian-operator bundle for the smooth part `f`.
pub trait SmoothObjective {
    fn shape(&self) -> Shape;
    fn value(&self, x: &Point) -> f64;
    fn gradient(&self, x: &Point) -> Point;
    /// Hessian of `f` anchored at `x`, as an operator.
    fn hessian_at(&self, x: &Point) -> Box<dyn HessianOp>;
    /// Lipschitz constant of the Hessian, `β₂`.
    fn beta2(&self) -> f64;
    /// Strong-convexity (or quadratic-growth) constant `α`, when known.
    fn alpha(&self) -> Option<f64> {
        None
    }
    /// Gradient Lipschitz constant `β`, when known.
    fn beta(&self) -> Option<f64> {
        None
    }
}

/// Linear operator `v ↦ ∇²f(x)·v` that exploits sparse or low-rank `v`.
pub trait HessianOp {
    fn apply_dense(&self, v: &Point) -> Point;

    /// Structure-aware product; implementors override the sparse/low-rank
    /// arms when they can beat densification.
    fn apply(&self, v: &StructuredPoint) -> Point {
        self.apply_dense(&v.densify())
    }
}

/// Which differential part the model exposes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelVariant {
    /// `Q`: plain second-order model (weak proximal Newton oracle).
    Unregularized,
    /// `Qʳ`: cubic-regularized model (weak regularized proximal Newton oracle).
    Regularized,
}

/// Smoothness constant `β̃` of the differential part over the feasible set:
/// `β` for the unregularized model, `β + β₂ D / 2` for the regularized model
/// on a domain of diameter `D`.
pub fn beta_tilde(
    obj: &dyn SmoothObjective,
    diameter: Option<f64>,
    regularized: bool,
) -> Result<f64> {
    let beta = obj
        .beta()
        .ok_or_else(|| Error::invalid("beta_tilde requires a known gradient Lipschitz constant"))?;
    if !regularized {
        return Ok(beta);
    }
    match diameter {
        Some(d) if d.is_finite() && d >= 0.0 => Ok(beta + obj.beta2() * d / 2.0),
        _ => Err(Error::invalid(
            "regularized beta_tilde requires a finite domain diameter",
        )),
    }
}

/// `|f(y) − f(x) − ⟨y−x, ∇f(x)⟩ − ½⟨y−x, ∇²f(x)(y−x)⟩| − (β₂/6)‖x−y‖³`.
///
/// Nonpositive values mean the cubic model bound holds for this pair.
pub fn check_cubic_bound(obj: &dyn SmoothObjective, x: &Point, y: &Point) -> Result<f64> {
    if x.shape() != obj.shape() || y.shape() != obj.shape() {
        return Err(Error::shape("check_cubic_bound operands".into()));
    }
    let d = y.sub(x);
    let hess = obj.hessian_at(x);
    let hd = hess.apply_dense(&d);
    let model = obj.value(x) + d.dot(&obj.gradient(x)) + 0.5 * d.dot(&hd);
    let dist = d.norm();
    Ok((obj.value(y) - model).abs() - obj.beta2() / 6.0 * dist.powi(3))
}

/// Frozen second-order model at an outer iterate, with the running inner
/// iterate `y` and its incrementally maintained model gradient.
pub struct ProximalModel {
    shape: Shape,
    anchor: Point,
    grad_anchor: Point,
    hess: Box<dyn HessianOp>,
    hess_anchor: Point,
    eta: f64,
    beta2: f64,
    variant: ModelVariant,
    cubic_coeff: f64,
    beta_tilde: f64,
    y: Point,
    /// `∇f(x) + η·H(y − x)`; the full model gradient adds the cubic term.
    lin_grad: Point,
    /// `⟨y − x, H(y − x)⟩`, maintained by the same recurrence.
    quad_form: f64,
    hvp_dense: Cell<u64>,
    hvp_structured: Cell<u64>,
}

impl ProximalModel {
    /// Freezes the model at `x_t` with unit step-size `η = 1`.
    pub fn new(
        obj: &dyn SmoothObjective,
        x_t: Point,
        variant: ModelVariant,
        beta_tilde: f64,
    ) -> Result<Self> {
        Self::with_eta(obj, x_t, 1.0, variant, beta_tilde)
    }

    pub fn with_eta(
        obj: &dyn SmoothObjective,
        x_t: Point,
        eta: f64,
        variant: ModelVariant,
        beta_tilde: f64,
    ) -> Result<Self> {
        if x_t.shape() != obj.shape() {
            return Err(Error::shape(format!(
                "anchor {} does not match objective {}",
                x_t.shape(),
                obj.shape()
            )));
        }
        ensure_finite(&x_t, "model anchor")?;
        if !(eta > 0.0) {
            return Err(Error::invalid("model step-size eta must be positive"));
        }
        if !(beta_tilde > 0.0) {
            return Err(Error::invalid("beta_tilde must be positive"));
        }
        let grad_anchor = obj.gradient(&x_t);
        let hess = obj.hessian_at(&x_t);
        let hess_anchor = hess.apply_dense(&x_t);
        let beta2 = obj.beta2();
        let cubic_coeff = match variant {
            ModelVariant::Unregularized => 0.0,
            ModelVariant::Regularized => eta * eta * beta2 / 6.0,
        };
        Ok(ProximalModel {
            shape: x_t.shape(),
            y: x_t.clone(),
            lin_grad: grad_anchor.clone(),
            anchor: x_t,
            grad_anchor,
            hess,
            hess_anchor,
            eta,
            beta2,
            variant,
            cubic_coeff,
            beta_tilde,
            quad_form: 0.0,
            hvp_dense: Cell::new(1),
            hvp_structured: Cell::new(0),
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn anchor(&self) -> &Point {
        &self.anchor
    }

    pub fn grad_anchor(&self) -> &Point {
        &self.grad_anchor
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn beta2(&self) -> f64 {
        self.beta2
    }

    pub fn variant(&self) -> ModelVariant {
        self.variant
    }

    pub fn is_regularized(&self) -> bool {
        self.variant == ModelVariant::Regularized
    }

    pub fn beta_tilde(&self) -> f64 {
        self.beta_tilde
    }

    pub fn current_y(&self) -> &Point {
        &self.y
    }

    /// Dense Hessian products performed so far (including the anchor product
    /// paid at construction).
    pub fn hvp_dense_count(&self) -> u64 {
        self.hvp_dense.get()
    }

    /// Hessian products against sparse/low-rank operands performed so far.
    pub fn hvp_structured_count(&self) -> u64 {
        self.hvp_structured.get()
    }

    /// `H·v` for dense `v`, counted.
    pub fn hess_apply_dense(&self, v: &Point) -> Point {
        self.hvp_dense.set(self.hvp_dense.get() + 1);
        self.hess.apply_dense(v)
    }

    fn hess_apply_structured(&self, v: &StructuredPoint) -> Point {
        match v {
            StructuredPoint::Dense(p) => self.hess_apply_dense(p),
            _ => {
                self.hvp_structured.set(self.hvp_structured.get() + 1);
                self.hess.apply(v)
            }
        }
    }

    /// `Q(w)` (plus the cubic term for the regularized variant). Exactly zero
    /// at the anchor. Costs one dense Hessian product.
    pub fn eval_q(&self, w: &Point) -> Result<f64> {
        if w.shape() != self.shape {
            return Err(Error::shape(format!(
                "eval_q point {} vs model {}",
                w.shape(),
                self.shape
            )));
        }
        let d = w.sub(&self.anchor);
        let hd = self.hess_apply_dense(&d);
        let mut q = d.dot(&self.grad_anchor) + 0.5 * self.eta * d.dot(&hd);
        if self.cubic_coeff != 0.0 {
            q += self.cubic_coeff * d.norm().powi(3);
        }
        Ok(q)
    }

    /// `∇Q(w) = ∇f(x) + η H (w − x) [+ (η²β₂/2)‖w−x‖(w−x)]`.
    pub fn grad_q(&self, w: &Point) -> Result<Point> {
        if w.shape() != self.shape {
            return Err(Error::shape(format!(
                "grad_q point {} vs model {}",
                w.shape(),
                self.shape
            )));
        }
        let d = w.sub(&self.anchor);
        let hd = self.hess_apply_dense(&d);
        let mut g = self.grad_anchor.clone();
        g.axpy(self.eta, &hd);
        if self.cubic_coeff != 0.0 {
            g.axpy(3.0 * self.cubic_coeff * d.norm(), &d);
        }
        Ok(g)
    }

    /// Model gradient at the tracked iterate `y`, assembled from the
    /// maintained linear part; no Hessian product.
    pub fn current_grad(&self) -> Point {
        let mut g = self.lin_grad.clone();
        if self.cubic_coeff != 0.0 {
            let d = self.y.sub(&self.anchor);
            g.axpy(3.0 * self.cubic_coeff * d.norm(), &d);
        }
        g
    }

    /// Model value at the tracked iterate `y`, from the maintained scalars;
    /// no Hessian product.
    pub fn phi_current(&self) -> f64 {
        let d = self.y.sub(&self.anchor);
        let mut q = d.dot(&self.grad_anchor) + 0.5 * self.eta * self.quad_form;
        if self.cubic_coeff != 0.0 {
            q += self.cubic_coeff * d.norm().powi(3);
        }
        q
    }

    /// Model value at `y + λ(w − y)` for structured `w`, without committing
    /// the move. Costs one structured Hessian product; commit the same `w`
    /// with [`ProximalModel::commit_update`] to take the step.
    pub fn probe_update(&self, lambda: f64, w: &StructuredPoint) -> Result<ProbedUpdate> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::invalid(format!(
                "update step lambda = {lambda} outside [0, 1]"
            )));
        }
        if w.shape() != self.shape {
            return Err(Error::shape(format!(
                "update point {} vs model {}",
                w.shape(),
                self.shape
            )));
        }
        // H·u for u = w − x, from one structured product and the anchor product.
        let mut hu = self.hess_apply_structured(w);
        hu.axpy(-1.0, &self.hess_anchor);

        let d = self.y.sub(&self.anchor);
        let u_dot_hu = w.dot_point(&hu) - self.anchor.dot(&hu);
        let d_dot_hu = d.dot(&hu);
        let quad_form = (1.0 - lambda).powi(2) * self.quad_form
            + 2.0 * lambda * (1.0 - lambda) * d_dot_hu
            + lambda * lambda * u_dot_hu;

        // ‖w − y‖ via norms and one structured dot.
        let w_norm_sq = w.norm_squared();
        let w_dot_y = w.dot_point(&self.y);
        let step_norm = lambda
            * (w_norm_sq - 2.0 * w_dot_y + self.y.norm_squared())
                .max(0.0)
                .sqrt();

        Ok(ProbedUpdate {
            lambda,
            hu,
            quad_form,
            step_norm,
        })
    }

    /// Model value the iterate would have after `y ← y + λ(w−y)`, from a
    /// probe; no Hessian product.
    pub fn probed_phi(&self, w: &StructuredPoint, probe: &ProbedUpdate) -> f64 {
        let lambda = probe.lambda;
        let mut d = self.y.sub(&self.anchor);
        d.scale_mut(1.0 - lambda);
        d.add_structured(lambda, w);
        d.axpy(-lambda, &self.anchor);
        let mut q = d.dot(&self.grad_anchor) + 0.5 * self.eta * probe.quad_form;
        if self.cubic_coeff != 0.0 {
            q += self.cubic_coeff * d.norm().powi(3);
        }
        q
    }

    /// Commits a probed update: `y ← (1−λ)y + λw`, refreshing the linear
    /// gradient part and the tracked quadratic form.
    pub fn commit_update(&mut self, w: &StructuredPoint, probe: ProbedUpdate) {
        let lambda = probe.lambda;
        self.y.scale_mut(1.0 - lambda);
        self.y.add_structured(lambda, w);
        self.lin_grad.scale_mut(1.0 - lambda);
        self.lin_grad.axpy(lambda, &self.grad_anchor);
        self.lin_grad.axpy(lambda * self.eta, &probe.hu);
        self.quad_form = probe.quad_form;
    }

    /// `y ← (1−λ)y + λw` in one shot; returns the step norm `λ‖w − y‖`.
    pub fn apply_update(&mut self, lambda: f64, w: &StructuredPoint) -> Result<f64> {
        let probe = self.probe_update(lambda, w)?;
        let step = probe.step_norm;
        self.commit_update(w, probe);
        Ok(step)
    }

    /// Restores the tracked iterate to the anchor.
    pub fn reset_to_anchor(&mut self) {
        self.y = self.anchor.clone();
        self.lin_grad = self.grad_anchor.clone();
        self.quad_form = 0.0;
    }
}

/// State computed by [`ProximalModel::probe_update`].
pub struct ProbedUpdate {
    lambda: f64,
    hu: Point,
    quad_form: f64,
    /// `λ‖w − y‖` for the probed move.
    pub step_norm: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SparseVec;
    use crate::problems::QuadraticObjective;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn unit_quadratic(n: usize) -> QuadraticObjective {
        QuadraticObjective::new(DMatrix::identity(n, n), DVector::zeros(n)).unwrap()
    }

    fn random_spd_quadratic(n: usize, seed: u64) -> QuadraticObjective {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        let a = &m * m.transpose() + DMatrix::identity(n, n);
        let b = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
        QuadraticObjective::new(a, b).unwrap()
    }

    fn pv(xs: &[f64]) -> Point {
        Point::Vec(DVector::from_column_slice(xs))
    }

    #[test]
    fn eval_q_hand_computed_example() {
        // f(x) = ½‖x‖², x_t = (1, 0), w = 0: Q = −1 + 0.5 = −0.5.
        let obj = unit_quadratic(2);
        let model =
            ProximalModel::new(&obj, pv(&[1.0, 0.0]), ModelVariant::Unregularized, 1.0).unwrap();
        assert_relative_eq!(model.eval_q(&pv(&[0.0, 0.0])).unwrap(), -0.5);
        assert_eq!(model.eval_q(&pv(&[1.0, 0.0])).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_model_is_exact() {
        // For quadratic f (β₂ = 0), Q(w) = f(w) − f(x_t) and ∇Q(w) = ∇f(w).
        let obj = random_spd_quadratic(6, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x_t = Point::Vec(DVector::from_fn(6, |_, _| rng.random::<f64>()));
        let model =
            ProximalModel::new(&obj, x_t.clone(), ModelVariant::Unregularized, 1.0).unwrap();
        for _ in 0..5 {
            let w = Point::Vec(DVector::from_fn(6, |_, _| rng.random::<f64>() * 2.0 - 1.0));
            assert_relative_eq!(
                model.eval_q(&w).unwrap(),
                obj.value(&w) - obj.value(&x_t),
                epsilon = 1e-12
            );
            let gq = model.grad_q(&w).unwrap();
            let gf = obj.gradient(&w);
            assert!(gq.sub(&gf).norm() < 1e-12);
        }
    }

    #[test]
    fn grad_q_at_anchor_is_grad_f() {
        let obj = random_spd_quadratic(5, 3);
        let x_t = pv(&[0.1, -0.2, 0.3, 0.0, 0.5]);
        for variant in [ModelVariant::Unregularized, ModelVariant::Regularized] {
            let model = ProximalModel::new(&obj, x_t.clone(), variant, 1.0).unwrap();
            let g = model.grad_q(&x_t).unwrap();
            assert!(g.sub(&obj.gradient(&x_t)).norm() < 1e-14);
        }
    }

    #[test]
    fn regularized_grad_matches_finite_differences() {
        let obj = random_spd_quadratic(4, 4).with_beta2(0.7);
        let x_t = pv(&[0.2, -0.1, 0.4, 0.3]);
        let model = ProximalModel::new(&obj, x_t, ModelVariant::Regularized, 1.0).unwrap();
        let w = pv(&[-0.3, 0.5, 0.1, -0.2]);
        let g = model.grad_q(&w).unwrap();
        let h = 1e-6;
        for i in 0..4 {
            let mut wp = w.clone();
            let mut wm = w.clone();
            match (&mut wp, &mut wm) {
                (Point::Vec(p), Point::Vec(m)) => {
                    p[i] += h;
                    m[i] -= h;
                }
                _ => unreachable!(),
            }
            let fd = (model.eval_q(&wp).unwrap() - model.eval_q(&wm).unwrap()) / (2.0 * h);
            assert_relative_eq!(g.expect_vec()[i], fd, epsilon = 1e-5, max_relative = 1e-5);
        }
    }

    #[test]
    fn update_with_lambda_zero_is_identity() {
        let obj = random_spd_quadratic(5, 5);
        let x_t = pv(&[0.1, 0.2, 0.3, 0.4, 0.5]);
        let mut model =
            ProximalModel::new(&obj, x_t.clone(), ModelVariant::Regularized, 1.0).unwrap();
        let w = StructuredPoint::Sparse(SparseVec::new(5, vec![(1, 0.7)]).unwrap());
        let step = model.apply_update(0.0, &w).unwrap();
        assert_eq!(step, 0.0);
        assert_eq!(model.current_y(), &x_t);
        assert!(model.current_grad().sub(&obj.gradient(&x_t)).norm() < 1e-15);
    }

    #[test]
    fn update_lambda_one_to_anchor_recovers_grad_anchor() {
        let obj = random_spd_quadratic(4, 6);
        let x_t = pv(&[0.3, 0.0, -0.1, 0.2]);
        let mut model =
            ProximalModel::new(&obj, x_t.clone(), ModelVariant::Regularized, 1.0).unwrap();
        // Wander somewhere, then jump back to the anchor with λ = 1.
        let w1 = StructuredPoint::Sparse(SparseVec::new(4, vec![(0, 1.0)]).unwrap());
        model.apply_update(0.5, &w1).unwrap();
        model
            .apply_update(1.0, &StructuredPoint::Dense(x_t.clone()))
            .unwrap();
        assert!(model.current_y().sub(&x_t).norm() < 1e-14);
        assert!(model.current_grad().sub(&obj.gradient(&x_t)).norm() < 1e-12);
    }

    #[test]
    fn recurrence_matches_recomputation_after_random_updates() {
        for variant in [ModelVariant::Unregularized, ModelVariant::Regularized] {
            let obj = random_spd_quadratic(8, 7).with_beta2(0.5);
            let x_t = pv(&[0.1; 8]);
            let mut model = ProximalModel::new(&obj, x_t, variant, 1.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            for _ in 0..5 {
                let idx = rng.random_range(0..8usize);
                let val = rng.random::<f64>() * 2.0 - 1.0;
                let w = StructuredPoint::Sparse(SparseVec::new(8, vec![(idx, val)]).unwrap());
                let lambda = rng.random::<f64>();
                model.apply_update(lambda, &w).unwrap();

                let direct = model.grad_q(model.current_y()).unwrap();
                let tracked = model.current_grad();
                assert!(
                    tracked.sub(&direct).norm() <= 1e-8 * (1.0 + tracked.norm()),
                    "tracked gradient diverged from recomputation"
                );
                let phi_direct = model.eval_q(model.current_y()).unwrap();
                assert_relative_eq!(model.phi_current(), phi_direct, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn probed_phi_matches_committed_phi() {
        let obj = random_spd_quadratic(6, 11).with_beta2(0.9);
        let mut model =
            ProximalModel::new(&obj, pv(&[0.2; 6]), ModelVariant::Regularized, 1.0).unwrap();
        let w = StructuredPoint::Sparse(SparseVec::new(6, vec![(2, -0.4), (5, 0.8)]).unwrap());
        let probe = model.probe_update(0.3, &w).unwrap();
        let predicted = model.probed_phi(&w, &probe);
        model.commit_update(&w, probe);
        assert_relative_eq!(predicted, model.phi_current(), epsilon = 1e-12);
    }

    #[test]
    fn beta_tilde_modes() {
        let obj = random_spd_quadratic(3, 9)
            .with_beta_override(10.0)
            .with_beta2(1.0);
        assert_relative_eq!(beta_tilde(&obj, None, false).unwrap(), 10.0);
        assert_relative_eq!(beta_tilde(&obj, Some(2.0), true).unwrap(), 11.0);
        assert!(beta_tilde(&obj, None, true).is_err());

        let degenerate = QuadraticObjective::new(DMatrix::zeros(2, 2), DVector::zeros(2)).unwrap();
        assert_eq!(beta_tilde(&degenerate, Some(5.0), true).unwrap(), 0.0);
    }

    #[test]
    fn cubic_bound_zero_for_quadratic_and_coincident_points() {
        let obj = random_spd_quadratic(4, 10).with_beta2(0.3);
        let x = pv(&[0.1, 0.2, -0.3, 0.0]);
        let y = pv(&[-0.2, 0.4, 0.1, 0.5]);
        // Quadratic f: model is exact, so violation = −(β₂/6)‖x−y‖³ ≤ 0.
        let v = check_cubic_bound(&obj, &x, &y).unwrap();
        let expected = -0.3 / 6.0 * x.sub(&y).norm().powi(3);
        assert_relative_eq!(v, expected, epsilon = 1e-12);
        assert_eq!(check_cubic_bound(&obj, &x, &x).unwrap(), 0.0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let obj = unit_quadratic(3);
        let model =
            ProximalModel::new(&obj, pv(&[0.0, 0.0, 0.0]), ModelVariant::Unregularized, 1.0)
                .unwrap();
        assert!(model.eval_q(&pv(&[1.0, 2.0])).is_err());
        assert!(model.grad_q(&pv(&[1.0])).is_err());
        assert!(ProximalModel::new(&obj, pv(&[0.0]), ModelVariant::Unregularized, 1.0).is_err());
    }
}
