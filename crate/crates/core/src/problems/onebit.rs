//! 1-bit matrix completion: logistic loss over observed entries of a square
//! matrix, ℓ2-regularized, constrained to a nuclear norm ball.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::logistic::{log1p_exp, sigmoid};
use crate::error::{Error, Result};
use crate::linalg::{Point, Shape, StructuredPoint};
use crate::model::{HessianOp, SmoothObjective};

/// Tight Hessian Lipschitz bound for the plain logistic loss
/// (`max |σ''| = 1/(6√3) ≈ 0.0962`); the benchmark configuration uses the
/// looser conventional value `β₂ = 1`.
pub const LOGISTIC_CURVATURE_VARIATION: f64 = 0.09622504486493764;

#[derive(Clone)]
struct McData {
    n: usize,
    /// Observed entries, sorted by row-major linear index `i * n + j`.
    omega: Vec<(u32, u32)>,
    labels: Vec<f64>,
    rho: f64,
}

/// A generated (or loaded) 1-bit matrix completion instance.
#[derive(Clone)]
pub struct OneBitMcInstance {
    data: Arc<McData>,
    pub r_sharp: usize,
    pub seed: u64,
    pub tau: f64,
    /// Ground-truth matrix; present on generated instances, absent after a
    /// round trip through the instance file (evaluation only).
    pub x_sharp: Option<DMatrix<f64>>,
}

/// On-disk layout of an instance: self-describing JSON with the observation
/// triplets `(i, j, y)`.
#[derive(Serialize, Deserialize)]
struct InstanceFile {
    format: String,
    version: u32,
    n: usize,
    r_sharp: usize,
    seed: u64,
    rho: f64,
    tau: f64,
    observations: Vec<(u32, u32, i8)>,
}

const INSTANCE_FORMAT: &str = "onebit-mc-instance";

impl OneBitMcInstance {
    pub fn n(&self) -> usize {
        self.data.n
    }

    pub fn rho(&self) -> f64 {
        self.data.rho
    }

    pub fn omega(&self) -> &[(u32, u32)] {
        &self.data.omega
    }

    pub fn labels(&self) -> &[f64] {
        &self.data.labels
    }

    pub fn n_observed(&self) -> usize {
        self.data.omega.len()
    }

    /// The smooth part as an objective with the conventional `β₂ = 1`.
    pub fn objective(&self) -> OneBitMcObjective {
        OneBitMcObjective {
            data: Arc::clone(&self.data),
            beta2: 1.0,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = InstanceFile {
            format: INSTANCE_FORMAT.to_string(),
            version: 1,
            n: self.data.n,
            r_sharp: self.r_sharp,
            seed: self.seed,
            rho: self.data.rho,
            tau: self.tau,
            observations: self
                .data
                .omega
                .iter()
                .zip(&self.data.labels)
                .map(|(&(i, j), &y)| (i, j, y as i8))
                .collect(),
        };
        let json = serde_json::to_string(&file)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path)?;
        let file: InstanceFile = serde_json::from_str(&json)?;
        if file.format != INSTANCE_FORMAT {
            return Err(Error::invalid(format!(
                "unrecognized instance format {:?}",
                file.format
            )));
        }
        let mut omega = Vec::with_capacity(file.observations.len());
        let mut labels = Vec::with_capacity(file.observations.len());
        for &(i, j, y) in &file.observations {
            if i as usize >= file.n || j as usize >= file.n {
                return Err(Error::invalid("observation index out of range"));
            }
            if y != 1 && y != -1 {
                return Err(Error::invalid("labels must be ±1"));
            }
            omega.push((i, j));
            labels.push(y as f64);
        }
        Ok(OneBitMcInstance {
            data: Arc::new(McData {
                n: file.n,
                omega,
                labels,
                rho: file.rho,
            }),
            r_sharp: file.r_sharp,
            seed: file.seed,
            tau: file.tau,
            x_sharp: None,
        })
    }
}

/// Generates a rank-`r_sharp` ground truth with Haar-random orthonormal
/// factors and singular values `0.1 + 3·U[0,1]`, samples `round(ratio·n²)`
/// entries uniformly without replacement, and draws ±1 labels from the
/// logistic observation model. `τ = ‖x♯‖_*`.
///
/// RNG streams: 0 = ground-truth factors, 1 = observation set, 2 = labels.
pub fn gen_onebit_mc(
    n: usize,
    r_sharp: usize,
    sampling_ratio: f64,
    rho: f64,
    seed: u64,
) -> Result<OneBitMcInstance> {
    if r_sharp == 0 || r_sharp > n {
        return Err(Error::invalid(format!(
            "rank {r_sharp} out of range for n = {n}"
        )));
    }
    if !(sampling_ratio > 0.0 && sampling_ratio <= 1.0) {
        return Err(Error::invalid("sampling ratio must lie in (0, 1]"));
    }
    if !(rho >= 0.0) {
        return Err(Error::invalid("rho must be nonnegative"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let u = haar_orthonormal(n, r_sharp, &mut rng);
    let v = haar_orthonormal(n, r_sharp, &mut rng);
    let sigma = DVector::from_fn(r_sharp, |_, _| 0.1 + 3.0 * rng.random::<f64>());
    let tau = sigma.sum();
    let x_sharp = &u * DMatrix::from_diagonal(&sigma) * v.transpose();

    rng.set_stream(1);
    let total = n * n;
    let m = (sampling_ratio * total as f64).round() as usize;
    let m = m.clamp(1, total);
    let mut linear: Vec<u32> = (0..total as u32).collect();
    for k in 0..m {
        let swap = rng.random_range(k..total);
        linear.swap(k, swap);
    }
    linear.truncate(m);
    linear.sort_unstable();
    let omega: Vec<(u32, u32)> = linear
        .iter()
        .map(|&idx| (idx / n as u32, idx % n as u32))
        .collect();

    rng.set_stream(2);
    let labels: Vec<f64> = omega
        .iter()
        .map(|&(i, j)| {
            let p = sigmoid(x_sharp[(i as usize, j as usize)]);
            if rng.random::<f64>() < p {
                1.0
            } else {
                -1.0
            }
        })
        .collect();

    Ok(OneBitMcInstance {
        data: Arc::new(McData {
            n,
            omega,
            labels,
            rho,
        }),
        r_sharp,
        seed,
        tau,
        x_sharp: Some(x_sharp),
    })
}

/// Thin Haar-distributed column-orthonormal factor via QR of a Gaussian
/// matrix, with the sign convention `diag(R) > 0` for determinism.
fn haar_orthonormal(n: usize, r: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, r, |_, _| StandardNormal.sample(rng));
    let qr = nalgebra::linalg::QR::new(g);
    let mut q = qr.q();
    let rmat = qr.r();
    for k in 0..r {
        if rmat[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}

pub struct OneBitMcObjective {
    data: Arc<McData>,
    beta2: f64,
}

impl OneBitMcObjective {
    pub fn with_beta2(mut self, beta2: f64) -> Self {
        self.beta2 = beta2;
        self
    }
}

impl SmoothObjective for OneBitMcObjective {
    fn shape(&self) -> Shape {
        Shape::Matrix(self.data.n, self.data.n)
    }

    fn value(&self, x: &Point) -> f64 {
        let x = x.expect_mat();
        let mut acc = 0.0;
        for (k, &(i, j)) in self.data.omega.iter().enumerate() {
            acc += log1p_exp(-self.data.labels[k] * x[(i as usize, j as usize)]);
        }
        acc + 0.5 * self.data.rho * x.norm_squared()
    }

    fn gradient(&self, x: &Point) -> Point {
        let x = x.expect_mat();
        let mut g = self.data.rho * x;
        for (k, &(i, j)) in self.data.omega.iter().enumerate() {
            let y = self.data.labels[k];
            g[(i as usize, j as usize)] += -y * sigmoid(-y * x[(i as usize, j as usize)]);
        }
        Point::Mat(g)
    }

    fn hessian_at(&self, x: &Point) -> Box<dyn HessianOp> {
        let x = x.expect_mat();
        // σ(x)σ(−x) entrywise on Ω; the label sign squares away.
        let weights: Vec<f64> = self
            .data
            .omega
            .iter()
            .map(|&(i, j)| {
                let t = x[(i as usize, j as usize)];
                sigmoid(t) * sigmoid(-t)
            })
            .collect();
        Box::new(OneBitMcHessian {
            data: Arc::clone(&self.data),
            weights,
        })
    }

    fn beta2(&self) -> f64 {
        self.beta2
    }

    fn alpha(&self) -> Option<f64> {
        (self.data.rho > 0.0).then_some(self.data.rho)
    }

    fn beta(&self) -> Option<f64> {
        Some(0.25 + self.data.rho)
    }
}

/// `V ↦ (d ⊙ V on Ω) + ρV`; a rank-`s` operand is evaluated on Ω in
/// `O(|Ω| s)` and densified only for the `ρV` term.
struct OneBitMcHessian {
    data: Arc<McData>,
    weights: Vec<f64>,
}

impl HessianOp for OneBitMcHessian {
    fn apply_dense(&self, v: &Point) -> Point {
        let v = v.expect_mat();
        let mut out = self.data.rho * v;
        for (k, &(i, j)) in self.data.omega.iter().enumerate() {
            out[(i as usize, j as usize)] += self.weights[k] * v[(i as usize, j as usize)];
        }
        Point::Mat(out)
    }

    fn apply(&self, v: &StructuredPoint) -> Point {
        match v {
            StructuredPoint::LowRank(lr) => {
                let mut out = DMatrix::zeros(self.data.n, self.data.n);
                lr.add_to_dense(self.data.rho, &mut out);
                for (k, &(i, j)) in self.data.omega.iter().enumerate() {
                    out[(i as usize, j as usize)] +=
                        self.weights[k] * lr.entry(i as usize, j as usize);
                }
                Point::Mat(out)
            }
            other => self.apply_dense(&other.densify()),
        }
    }
}
