//! Real Lie algebras given by structure constants.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::tensor::{Tensor, Variance};

/// Jacobi identity tolerance enforced at construction.
pub const JACOBI_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("dimension must be even and at least 2, got {0}")]
    OddDimension(usize),
    #[error("structure constant array has {got} entries, expected {expected}")]
    BadLength { got: usize, expected: usize },
    #[error("structure constants not antisymmetric at c^{k}_{{{i}{j}}}")]
    NotAntisymmetric { k: usize, i: usize, j: usize },
    #[error("Jacobi identity residual {0:e} exceeds {JACOBI_TOL:e}")]
    Jacobi(f64),
    #[error("structure constants must be finite")]
    NonFinite,
}

/// Structure constants `c^k_{ij}` with `[e_i, e_j] = sum_k c^k_{ij} e_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LieAlgebraSpec {
    name: String,
    dim: usize,
    /// Indexed `(k, i, j)`.
    c: Tensor,
}

impl LieAlgebraSpec {
    /// Build from a `(k, i, j)`-indexed array. Antisymmetry must hold exactly
    /// and the Jacobi residual must be at most [`JACOBI_TOL`].
    pub fn new(name: impl Into<String>, dim: usize, c: Vec<f64>) -> Result<Self, AlgebraError> {
        if dim < 2 || !dim.is_multiple_of(2) {
            return Err(AlgebraError::OddDimension(dim));
        }
        let expected = dim * dim * dim;
        if c.len() != expected {
            return Err(AlgebraError::BadLength { got: c.len(), expected });
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(AlgebraError::NonFinite);
        }
        let c =
            Tensor::from_data(dim, vec![Variance::Upper, Variance::Lower, Variance::Lower], c).expect("length checked");
        let alg = LieAlgebraSpec {
            name: name.into(),
            dim,
            c,
        };
        for k in 0..dim {
            for i in 0..dim {
                for j in 0..dim {
                    if alg.c(k, i, j) != -alg.c(k, j, i) {
                        return Err(AlgebraError::NotAntisymmetric { k, i, j });
                    }
                }
            }
        }
        let r = alg.jacobi_residual();
        if r > JACOBI_TOL {
            return Err(AlgebraError::Jacobi(r));
        }
        Ok(alg)
    }

    /// Build from brackets `[e_i, e_j] = sum_k v_k e_k` listed for `i < j`;
    /// the antisymmetric twins are filled in.
    pub fn from_brackets(
        name: impl Into<String>,
        dim: usize,
        brackets: &[(usize, usize, usize, f64)],
    ) -> Result<Self, AlgebraError> {
        let mut c = vec![0.0; dim * dim * dim];
        for &(i, j, k, v) in brackets {
            if i >= dim || j >= dim || k >= dim {
                return Err(AlgebraError::BadLength {
                    got: i.max(j).max(k) + 1,
                    expected: dim,
                });
            }
            c[(k * dim + i) * dim + j] = v;
            c[(k * dim + j) * dim + i] = -v;
        }
        Self::new(name, dim, c)
    }

    pub fn abelian(dim: usize) -> Self {
        Self::new(format!("abelian_{dim}"), dim, vec![0.0; dim * dim * dim]).expect("abelian is valid")
    }

    /// Heisenberg algebra times a line: `[e_1, e_2] = e_3` (1-based).
    pub fn heisenberg_r() -> Self {
        Self::from_brackets("heisenberg_r", 4, &[(0, 1, 2, 1.0)]).expect("valid")
    }

    /// `su(2) + R` with `c^k_{ij} = eps_{ijk}` on the first three indices.
    pub fn su2_r() -> Self {
        Self::from_brackets("su2_r", 4, &[(0, 1, 2, 1.0), (1, 2, 0, 1.0), (0, 2, 1, -1.0)]).expect("valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn c(&self, k: usize, i: usize, j: usize) -> f64 {
        self.c.data()[(k * self.dim + i) * self.dim + j]
    }

    pub fn structure_constants(&self) -> &Tensor {
        &self.c
    }

    /// `[u, v]` for component vectors.
    pub fn bracket(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        let mut out = DVector::zeros(n);
        for i in 0..n {
            if u[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                let w = u[i] * v[j];
                if w == 0.0 {
                    continue;
                }
                for k in 0..n {
                    out[k] += w * self.c(k, i, j);
                }
            }
        }
        out
    }

    /// `ad_u` as a matrix: `ad_u v = [u, v]`.
    pub fn ad(&self, u: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim;
        DMatrix::from_fn(n, n, |k, j| (0..n).map(|i| u[i] * self.c(k, i, j)).sum())
    }

    pub fn jacobi_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut acc = 0.0;
                        for m in 0..n {
                            acc += self.c(m, i, j) * self.c(l, m, k)
                                + self.c(m, j, k) * self.c(l, m, i)
                                + self.c(m, k, i) * self.c(l, m, j);
                        }
                        worst = worst.max(acc.abs());
                    }
                }
            }
        }
        worst
    }

    /// Rewrite the structure constants in the frame `f_a = sum_i basis[(i, a)] e_i`.
    pub fn in_frame(&self, basis: &DMatrix<f64>, dual: &DMatrix<f64>) -> LieAlgebraSpec {
        let c = self.c.to_frame(basis, dual);
        // Frame changes preserve antisymmetry only up to rounding; restore it
        // exactly so downstream invariants are checked against clean input.
        let n = self.dim;
        let mut data = c.data().to_vec();
        for k in 0..n {
            for i in 0..n {
                for j in (i + 1)..n {
                    let a = (k * n + i) * n + j;
                    let b = (k * n + j) * n + i;
                    let v = 0.5 * (data[a] - data[b]);
                    data[a] = v;
                    data[b] = -v;
                }
                data[(k * n + i) * n + i] = 0.0;
            }
        }
        LieAlgebraSpec {
            name: self.name.clone(),
            dim: n,
            c: Tensor::from_data(n, c.variance().to_vec(), data).expect("same shape"),
        }
    }

    /// Brackets `(i, j, k, value)` with `i < j` and nonzero value.
    pub fn nonzero_brackets(&self) -> Vec<(usize, usize, usize, f64)> {
        let n = self.dim;
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                for k in 0..n {
                    let v = self.c(k, i, j);
                    if v != 0.0 {
                        out.push((i, j, k, v));
                    }
                }
            }
        }
        out
    }
}
