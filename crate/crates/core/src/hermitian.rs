//! Almost Hermitian pairs `(g, J)` on a frame.

use nalgebra::DMatrix;
use rand::Rng;
use thiserror::Error;

use crate::algebra::LieAlgebraSpec;
use crate::tensor::{j_squared_residual, Metric, Tensor, TensorError};

/// Default tolerance for `J^2 = -1` and `J^T g J = g`.
pub const PAIR_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PairError {
    #[error(transparent)]
    Metric(#[from] TensorError),
    #[error("J has shape {rows}x{cols}, metric has dimension {dim}")]
    Shape { rows: usize, cols: usize, dim: usize },
    #[error("J^2 + 1 residual {residual:e} exceeds {tol:e}")]
    JSquared { residual: f64, tol: f64 },
    #[error("compatibility residual |J^T g J - g| = {residual:e} exceeds {tol:e}")]
    Incompatible { residual: f64, tol: f64 },
}

/// Metric `g` and almost complex structure `J`, with `J e_i = sum_k J[(k, i)] e_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlmostHermitianPair {
    metric: Metric,
    j: DMatrix<f64>,
}

impl AlmostHermitianPair {
    pub fn new(g: DMatrix<f64>, j: DMatrix<f64>) -> Result<Self, PairError> {
        Self::with_tolerance(g, j, PAIR_TOL)
    }

    /// Construct with a custom structure tolerance (the integrator uses its
    /// drift tolerance here).
    pub fn with_tolerance(g: DMatrix<f64>, j: DMatrix<f64>, tol: f64) -> Result<Self, PairError> {
        let metric = Metric::new(g)?;
        Self::from_metric(metric, j, tol)
    }

    pub fn from_metric(metric: Metric, j: DMatrix<f64>, tol: f64) -> Result<Self, PairError> {
        let dim = metric.dim();
        if j.nrows() != dim || j.ncols() != dim {
            return Err(PairError::Shape {
                rows: j.nrows(),
                cols: j.ncols(),
                dim,
            });
        }
        let pair = AlmostHermitianPair { metric, j };
        let residual = pair.j_squared_residual();
        if !(residual <= tol) {
            return Err(PairError::JSquared { residual, tol });
        }
        let residual = pair.compat_residual();
        if !(residual <= tol) {
            return Err(PairError::Incompatible { residual, tol });
        }
        Ok(pair)
    }

    /// No structure checks at all; only the metric must be positive definite.
    /// Used for integrator stages, where drift is measured rather than gated.
    pub(crate) fn unchecked(metric: Metric, j: DMatrix<f64>) -> Self {
        AlmostHermitianPair { metric, j }
    }

    /// Standard structure `J_0` on the coordinate frame with `g = I`:
    /// `J e_{2p} = e_{2p+1}` (0-based).
    pub fn standard(dim: usize) -> Self {
        AlmostHermitianPair {
            metric: Metric::identity(dim),
            j: standard_j(dim),
        }
    }

    /// Random compatible pair: `g = A A^T + delta I`, `J` conjugated from
    /// `J_0` by the g-orthonormal frame.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Self {
        const DELTA: f64 = 0.1;
        loop {
            let a = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
            let g = &a * a.transpose() + DMatrix::identity(dim, dim) * DELTA;
            let Ok(metric) = Metric::new(g) else { continue };
            let j = metric.orthonormal_basis() * standard_j(dim) * metric.orthonormal_dual();
            if let Ok(p) = Self::from_metric(metric, j, 1e-11) {
                return p;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn g(&self) -> &DMatrix<f64> {
        self.metric.g()
    }

    pub fn j(&self) -> &DMatrix<f64> {
        &self.j
    }

    /// `omega(X, Y) = g(JX, Y)`.
    pub fn omega(&self) -> Tensor {
        Tensor::from_bilinear(&(self.j.transpose() * self.metric.g()))
    }

    pub fn j_squared_residual(&self) -> f64 {
        j_squared_residual(&self.j)
    }

    /// Max entry of `J^T g J - g`.
    pub fn compat_residual(&self) -> f64 {
        let g = self.metric.g();
        (self.j.transpose() * g * &self.j - g).amax()
    }

    /// The same pair expressed in its own g-orthonormal frame, together with
    /// the algebra rewritten in that frame. There `g = I`.
    pub fn orthonormalize(&self, algebra: &LieAlgebraSpec) -> (LieAlgebraSpec, AlmostHermitianPair) {
        let p = self.metric.orthonormal_basis();
        let q = self.metric.orthonormal_dual();
        let j = q * &self.j * p;
        (
            algebra.in_frame(p, q),
            AlmostHermitianPair {
                metric: Metric::identity(self.dim()),
                j,
            },
        )
    }

    /// `(c g, J)`.
    pub fn scaled(&self, c: f64) -> Result<Self, PairError> {
        Ok(AlmostHermitianPair {
            metric: self.metric.scaled(c)?,
            j: self.j.clone(),
        })
    }
}

pub fn standard_j(dim: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(dim, dim);
    for p in 0..dim / 2 {
        j[(2 * p + 1, 2 * p)] = 1.0;
        j[(2 * p, 2 * p + 1)] = -1.0;
    }
    j
}

/// Build `J` from images of basis vectors: `J e_i = sum_k rows[k][i] e_k`,
/// i.e. `images[i]` is the column `J e_i`.
pub fn j_from_images(images: &[Vec<f64>]) -> DMatrix<f64> {
    let n = images.len();
    DMatrix::from_fn(n, n, |k, i| images[i][k])
}
