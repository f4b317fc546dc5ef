//! Dense multilinear algebra over a fixed real frame.
//!
//! Tensors are stored row-major by slot order with one variance flag per
//! slot. Contractions and norms follow the usual convention of summing over
//! a g-orthonormal basis, which for a general metric means contracting with
//! `g` or `g^{-1}` according to the slot variances.

use nalgebra::DMatrix;
use thiserror::Error;

/// Tolerance for `J^2 = -1` when a complex structure is handed to a projection.
pub const J_SQUARED_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("slot {slot} out of range for a tensor of order {order}")]
    SlotOutOfRange { slot: usize, order: usize },
    #[error("cannot contract slot {0} with itself")]
    SameSlot(usize),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("shape mismatch: tensors differ in order or variance")]
    ShapeMismatch,
    #[error("expected an order-{expected} tensor with {what}, got order {got}")]
    WrongShape {
        expected: usize,
        got: usize,
        what: &'static str,
    },
    #[error("J^2 + 1 has max entry {residual:e}, exceeds {tol:e}")]
    NotComplexStructure { residual: f64, tol: f64 },
    #[error("metric is not positive definite")]
    NotPositiveDefinite,
    #[error("metric inverse residual {0:e} exceeds 1e-13")]
    IllConditioned(f64),
    #[error("metric must be a square matrix of even size, got {rows}x{cols}")]
    BadMetricShape { rows: usize, cols: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variance {
    Upper,
    Lower,
}

/// Dense tensor over a frame of dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dim: usize,
    variance: Vec<Variance>,
    data: Vec<f64>,
}

fn pow(dim: usize, order: usize) -> usize {
    dim.pow(order as u32)
}

/// Iterate over every multi-index of the given order, in row-major order.
pub(crate) fn for_each_index(dim: usize, order: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; order];
    let total = pow(dim, order);
    for _ in 0..total {
        f(&idx);
        for s in (0..order).rev() {
            idx[s] += 1;
            if idx[s] < dim {
                break;
            }
            idx[s] = 0;
        }
    }
}

impl Tensor {
    pub fn zeros(dim: usize, variance: Vec<Variance>) -> Self {
        let len = pow(dim, variance.len());
        Tensor {
            dim,
            variance,
            data: vec![0.0; len],
        }
    }

    /// Tensor with every slot lowered.
    pub fn zeros_lower(dim: usize, order: usize) -> Self {
        Self::zeros(dim, vec![Variance::Lower; order])
    }

    pub fn from_fn(dim: usize, variance: Vec<Variance>, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut data = Vec::with_capacity(pow(dim, variance.len()));
        for_each_index(dim, variance.len(), |ix| data.push(f(ix)));
        Tensor { dim, variance, data }
    }

    pub fn lower_from_fn(dim: usize, order: usize, f: impl FnMut(&[usize]) -> f64) -> Self {
        Self::from_fn(dim, vec![Variance::Lower; order], f)
    }

    pub fn from_data(dim: usize, variance: Vec<Variance>, data: Vec<f64>) -> Result<Self, TensorError> {
        if data.len() != pow(dim, variance.len()) {
            return Err(TensorError::ShapeMismatch);
        }
        Ok(Tensor { dim, variance, data })
    }

    pub fn scalar(dim: usize, value: f64) -> Self {
        Tensor {
            dim,
            variance: Vec::new(),
            data: vec![value],
        }
    }

    /// The identity endomorphism, stored with slots (upper, lower).
    pub fn identity_endomorphism(dim: usize) -> Self {
        Self::from_fn(dim, vec![Variance::Upper, Variance::Lower], |ix| {
            if ix[0] == ix[1] {
                1.0
            } else {
                0.0
            }
        })
    }

    /// A bilinear form (both slots lowered) from a square matrix.
    pub fn from_bilinear(m: &DMatrix<f64>) -> Self {
        Self::lower_from_fn(m.nrows(), 2, |ix| m[(ix[0], ix[1])])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.variance.len()
    }

    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn offset(&self, ix: &[usize]) -> usize {
        debug_assert_eq!(ix.len(), self.order());
        ix.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    #[inline]
    pub fn get(&self, ix: &[usize]) -> f64 {
        self.data[self.offset(ix)]
    }

    #[inline]
    pub fn set(&mut self, ix: &[usize], v: f64) {
        let o = self.offset(ix);
        self.data[o] = v;
    }

    /// Value of a scalar (order-0) tensor.
    pub fn value(&self) -> f64 {
        debug_assert_eq!(self.order(), 0);
        self.data[0]
    }

    fn same_shape(&self, other: &Tensor) -> Result<(), TensorError> {
        if self.dim != other.dim {
            return Err(TensorError::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        if self.variance != other.variance {
            return Err(TensorError::ShapeMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        self.same_shape(other)?;
        Ok(self.zip_map(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        self.same_shape(other)?;
        Ok(self.zip_map(other, |a, b| a - b))
    }

    pub fn scale(&self, s: f64) -> Tensor {
        Tensor {
            dim: self.dim,
            variance: self.variance.clone(),
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
        Tensor {
            dim: self.dim,
            variance: self.variance.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Linear combination `sum c_k T_k`; all terms must share a shape.
    pub fn combine(terms: &[(f64, &Tensor)]) -> Result<Tensor, TensorError> {
        let (c0, t0) = terms.first().ok_or(TensorError::ShapeMismatch)?;
        let mut out = t0.scale(*c0);
        for (c, t) in &terms[1..] {
            out.same_shape(t)?;
            for (o, v) in out.data.iter_mut().zip(&t.data) {
                *o += c * v;
            }
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest entrywise difference; panics on shape mismatch since callers
    /// only compare tensors built from the same recipe.
    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        assert_eq!(self.data.len(), other.data.len(), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Reorder slots: output slot `s` is input slot `perm[s]`.
    pub fn permute(&self, perm: &[usize]) -> Tensor {
        assert_eq!(perm.len(), self.order());
        let variance = perm.iter().map(|&p| self.variance[p]).collect();
        let mut src = vec![0usize; self.order()];
        Tensor::from_fn(self.dim, variance, |ix| {
            for (s, &p) in perm.iter().enumerate() {
                src[p] = ix[s];
            }
            self.get(&src)
        })
    }

    /// Swap the two slots of an order-2 tensor.
    pub fn transpose(&self) -> Tensor {
        self.permute(&[1, 0])
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        assert_eq!(self.order(), 2, "to_matrix needs an order-2 tensor");
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(&[i, j]))
    }

    /// Apply `m` to one slot: `new[.., a, ..] = sum_i m[(i, a)] old[.., i, ..]`.
    pub fn map_slot(&self, slot: usize, m: &DMatrix<f64>, variance: Variance) -> Tensor {
        let mut out_var = self.variance.clone();
        out_var[slot] = variance;
        let mut src = vec![0usize; self.order()];
        Tensor::from_fn(self.dim, out_var, |ix| {
            src.copy_from_slice(ix);
            let mut acc = 0.0;
            for i in 0..self.dim {
                src[slot] = i;
                acc += m[(i, ix[slot])] * self.get(&src);
            }
            acc
        })
    }

    /// Components in the frame `f_a = sum_i basis[(i, a)] e_i`, whose dual
    /// coframe is given by the rows of `dual = basis^{-1}`.
    pub fn to_frame(&self, basis: &DMatrix<f64>, dual: &DMatrix<f64>) -> Tensor {
        let dual_t = dual.transpose();
        (0..self.order()).fold(self.clone(), |t, s| match self.variance[s] {
            Variance::Lower => t.map_slot(s, basis, Variance::Lower),
            Variance::Upper => t.map_slot(s, &dual_t, Variance::Upper),
        })
    }

    /// Inverse of [`Tensor::to_frame`]: components back in the coordinate frame.
    pub fn from_frame(&self, basis: &DMatrix<f64>, dual: &DMatrix<f64>) -> Tensor {
        let basis_t = basis.transpose();
        (0..self.order()).fold(self.clone(), |t, s| match self.variance[s] {
            Variance::Lower => t.map_slot(s, dual, Variance::Lower),
            Variance::Upper => t.map_slot(s, &basis_t, Variance::Upper),
        })
    }

    /// Lower a slot with the metric.
    pub fn lower(&self, slot: usize, m: &Metric) -> Tensor {
        debug_assert_eq!(self.variance[slot], Variance::Upper);
        self.map_slot(slot, m.g(), Variance::Lower)
    }

    /// Raise a slot with the metric.
    pub fn raise(&self, slot: usize, m: &Metric) -> Tensor {
        debug_assert_eq!(self.variance[slot], Variance::Lower);
        self.map_slot(slot, m.g_inv(), Variance::Upper)
    }
}

/// A Riemannian metric on the frame with cached inverse and orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    basis: DMatrix<f64>,
    dual: DMatrix<f64>,
}

impl Metric {
    pub fn new(g: DMatrix<f64>) -> Result<Self, TensorError> {
        Self::build(g, true)
    }

    /// Like [`Metric::new`] but skipping the `g g^{-1} = I` entrywise gate.
    /// Used for intermediate integrator stages where only positivity matters.
    pub fn new_unchecked_inverse(g: DMatrix<f64>) -> Result<Self, TensorError> {
        Self::build(g, false)
    }

    fn build(g: DMatrix<f64>, check_inverse: bool) -> Result<Self, TensorError> {
        let (rows, cols) = g.shape();
        if rows != cols || rows == 0 || rows % 2 != 0 {
            return Err(TensorError::BadMetricShape { rows, cols });
        }
        let g = (&g + g.transpose()) * 0.5;
        if !g.iter().all(|v| v.is_finite()) {
            return Err(TensorError::NotPositiveDefinite);
        }
        let chol = g.clone().cholesky().ok_or(TensorError::NotPositiveDefinite)?;
        let mut g_inv = chol.inverse();
        // one step of iterative refinement: X <- X + X (I - g X)
        let id = DMatrix::<f64>::identity(rows, rows);
        let r = &id - &g * &g_inv;
        g_inv = &g_inv + &g_inv * r;
        g_inv = (&g_inv + g_inv.transpose()) * 0.5;
        if check_inverse {
            let residual = (&g * &g_inv - &id).amax();
            if residual > 1e-13 {
                return Err(TensorError::IllConditioned(residual));
            }
        }
        let basis = gram_schmidt(&g)?;
        let dual = basis.transpose() * &g;
        Ok(Metric { g, g_inv, basis, dual })
    }

    pub fn identity(dim: usize) -> Self {
        let id = DMatrix::identity(dim, dim);
        Metric {
            g: id.clone(),
            g_inv: id.clone(),
            basis: id.clone(),
            dual: id,
        }
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn g_inv(&self) -> &DMatrix<f64> {
        &self.g_inv
    }

    /// Columns form a g-orthonormal basis.
    pub fn orthonormal_basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Inverse of the orthonormal basis matrix (`basis^T g`).
    pub fn orthonormal_dual(&self) -> &DMatrix<f64> {
        &self.dual
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.g
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn scaled(&self, c: f64) -> Result<Self, TensorError> {
        Metric::new(&self.g * c)
    }
}

/// Modified Gram–Schmidt on the standard frame in the inner product `g`,
/// without pivoting.
fn gram_schmidt(g: &DMatrix<f64>) -> Result<DMatrix<f64>, TensorError> {
    let n = g.nrows();
    let mut basis = DMatrix::<f64>::identity(n, n);
    let inner = |u: &[f64], v: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += u[i] * g[(i, j)] * v[j];
            }
        }
        acc
    };
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for a in 0..n {
        let mut v: Vec<f64> = (0..n).map(|i| if i == a { 1.0 } else { 0.0 }).collect();
        for _pass in 0..2 {
            for u in &cols {
                let p = inner(u, &v);
                for i in 0..n {
                    v[i] -= p * u[i];
                }
            }
        }
        let len2 = inner(&v, &v);
        if !(len2 > 0.0) {
            return Err(TensorError::NotPositiveDefinite);
        }
        let len = len2.sqrt();
        v.iter_mut().for_each(|x| *x /= len);
        cols.push(v);
    }
    for (a, col) in cols.iter().enumerate() {
        for i in 0..n {
            basis[(i, a)] = col[i];
        }
    }
    Ok(basis)
}

fn check_slots(t: &Tensor, a: usize, b: usize, m: &Metric) -> Result<(), TensorError> {
    for s in [a, b] {
        if s >= t.order() {
            return Err(TensorError::SlotOutOfRange {
                slot: s,
                order: t.order(),
            });
        }
    }
    if a == b {
        return Err(TensorError::SameSlot(a));
    }
    if m.dim() != t.dim() {
        return Err(TensorError::DimensionMismatch {
            left: t.dim(),
            right: m.dim(),
        });
    }
    Ok(())
}

/// Trace of `t` over two slots, pairing them with `g^{-1}`, `g` or the
/// identity according to their variances.
pub fn contract(t: &Tensor, slot_a: usize, slot_b: usize, m: &Metric) -> Result<Tensor, TensorError> {
    check_slots(t, slot_a, slot_b, m)?;
    let dim = t.dim();
    let weight: Option<&DMatrix<f64>> = match (t.variance[slot_a], t.variance[slot_b]) {
        (Variance::Lower, Variance::Lower) => Some(m.g_inv()),
        (Variance::Upper, Variance::Upper) => Some(m.g()),
        _ => None,
    };
    let keep: Vec<usize> = (0..t.order()).filter(|&s| s != slot_a && s != slot_b).collect();
    let variance = keep.iter().map(|&s| t.variance[s]).collect();
    let mut src = vec![0usize; t.order()];
    Ok(Tensor::from_fn(dim, variance, |ix| {
        for (k, &s) in keep.iter().enumerate() {
            src[s] = ix[k];
        }
        let mut acc = 0.0;
        match weight {
            Some(w) => {
                for i in 0..dim {
                    src[slot_a] = i;
                    for j in 0..dim {
                        let wij = w[(i, j)];
                        if wij != 0.0 {
                            src[slot_b] = j;
                            acc += wij * t.get(&src);
                        }
                    }
                }
            }
            None => {
                for i in 0..dim {
                    src[slot_a] = i;
                    src[slot_b] = i;
                    acc += t.get(&src);
                }
            }
        }
        acc
    }))
}

/// Reference contraction: explicit loops over a Gram–Schmidt orthonormal
/// frame, plugging `f_a` into lower slots and `f^a` into upper slots.
pub fn oracle_contract(t: &Tensor, slot_a: usize, slot_b: usize, m: &Metric) -> Result<Tensor, TensorError> {
    check_slots(t, slot_a, slot_b, m)?;
    let dim = t.dim();
    let basis = gram_schmidt(m.g())?;
    let dual = basis.transpose() * m.g();
    // component i of the a-th frame element plugged into a slot of given variance
    let plug = |v: Variance, a: usize, i: usize| -> f64 {
        match v {
            Variance::Lower => basis[(i, a)],
            Variance::Upper => dual[(a, i)],
        }
    };
    let keep: Vec<usize> = (0..t.order()).filter(|&s| s != slot_a && s != slot_b).collect();
    let variance: Vec<Variance> = keep.iter().map(|&s| t.variance[s]).collect();
    let (va, vb) = (t.variance[slot_a], t.variance[slot_b]);
    let mut out = Tensor::zeros(dim, variance);
    let mut src = vec![0usize; t.order()];
    for_each_index(dim, keep.len(), |ix| {
        for (k, &s) in keep.iter().enumerate() {
            src[s] = ix[k];
        }
        let mut acc = 0.0;
        for a in 0..dim {
            for i in 0..dim {
                for j in 0..dim {
                    src[slot_a] = i;
                    src[slot_b] = j;
                    acc += plug(va, a, i) * plug(vb, a, j) * t.get(&src);
                }
            }
        }
        let o = out.offset(ix);
        out.data[o] = acc;
    });
    Ok(out)
}

/// `|T|`: square root of the sum of squared components in a g-orthonormal frame.
pub fn frame_norm(t: &Tensor, m: &Metric) -> f64 {
    let on = t.to_frame(m.orthonormal_basis(), m.orthonormal_dual());
    on.data.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Reference norm: `sum T_{i..} T_{j..} prod_s G_s(i_s, j_s)` by brute force,
/// with `G = g^{-1}` on lower slots and `g` on upper slots.
pub fn oracle_norm(t: &Tensor, m: &Metric) -> f64 {
    let r = t.order();
    let dim = t.dim();
    let mut total = 0.0;
    for_each_index(dim, r, |ix| {
        let a = t.get(ix);
        if a == 0.0 {
            return;
        }
        for_each_index(dim, r, |jx| {
            let mut w = 1.0;
            for s in 0..r {
                w *= match t.variance[s] {
                    Variance::Lower => m.g_inv()[(ix[s], jx[s])],
                    Variance::Upper => m.g()[(ix[s], jx[s])],
                };
            }
            total += w * a * t.get(jx);
        });
    });
    total.max(0.0).sqrt()
}

/// g-inner product of two tensors of identical shape.
pub fn inner(a: &Tensor, b: &Tensor, m: &Metric) -> Result<f64, TensorError> {
    a.same_shape(b)?;
    let (p, q) = (m.orthonormal_basis(), m.orthonormal_dual());
    let (ao, bo) = (a.to_frame(p, q), b.to_frame(p, q));
    Ok(ao.data.iter().zip(&bo.data).map(|(x, y)| x * y).sum())
}

fn require_bilinear(h: &Tensor) -> Result<(), TensorError> {
    if h.order() != 2 || h.variance.iter().any(|v| *v != Variance::Lower) {
        return Err(TensorError::WrongShape {
            expected: 2,
            got: h.order(),
            what: "both slots lower",
        });
    }
    Ok(())
}

/// Max entry of `J^2 + 1`.
pub fn j_squared_residual(j: &DMatrix<f64>) -> f64 {
    let n = j.nrows();
    (j * j + DMatrix::<f64>::identity(n, n)).amax()
}

fn require_complex_structure(j: &DMatrix<f64>, dim: usize) -> Result<(), TensorError> {
    if j.nrows() != dim || j.ncols() != dim {
        return Err(TensorError::DimensionMismatch {
            left: dim,
            right: j.nrows(),
        });
    }
    let residual = j_squared_residual(j);
    if residual > J_SQUARED_TOL {
        return Err(TensorError::NotComplexStructure {
            residual,
            tol: J_SQUARED_TOL,
        });
    }
    Ok(())
}

/// Split a bilinear form into symmetric and antisymmetric parts.
pub fn project_sym_skew(h: &Tensor) -> Result<(Tensor, Tensor), TensorError> {
    require_bilinear(h)?;
    let ht = h.transpose();
    Ok((
        h.zip_map(&ht, |a, b| 0.5 * (a + b)),
        h.zip_map(&ht, |a, b| 0.5 * (a - b)),
    ))
}

pub fn sym(h: &Tensor) -> Tensor {
    h.zip_map(&h.transpose(), |a, b| 0.5 * (a + b))
}

pub fn skew(h: &Tensor) -> Tensor {
    h.zip_map(&h.transpose(), |a, b| 0.5 * (a - b))
}

/// `h(JX, JY)` for a bilinear form `h`, with `J e_i = sum_k J[(k, i)] e_k`.
pub fn j_conjugate(h: &Tensor, j: &DMatrix<f64>) -> Tensor {
    let hm = h.to_matrix();
    Tensor::from_bilinear(&(j.transpose() * hm * j))
}

/// The `(1,1)` and `(0,2)+(2,0)` parts of a bilinear form with respect to `J`.
pub fn project_j(h: &Tensor, j: &DMatrix<f64>) -> Result<(Tensor, Tensor), TensorError> {
    require_bilinear(h)?;
    require_complex_structure(j, h.dim())?;
    Ok(split_j(h, j))
}

/// [`project_j`] without input validation, for hot paths and for structures
/// that are allowed to drift slightly off `J^2 = -1`.
pub fn split_j(h: &Tensor, j: &DMatrix<f64>) -> (Tensor, Tensor) {
    let hj = j_conjugate(h, j);
    (
        h.zip_map(&hj, |a, b| 0.5 * (a + b)),
        h.zip_map(&hj, |a, b| 0.5 * (a - b)),
    )
}

pub fn part_11(h: &Tensor, j: &DMatrix<f64>) -> Tensor {
    split_j(h, j).0
}

pub fn part_02(h: &Tensor, j: &DMatrix<f64>) -> Tensor {
    split_j(h, j).1
}

/// Right composition with `J`: `(TJ)(X, Y) = T(JX, Y)`.
pub fn compose_j(t: &Tensor, j: &DMatrix<f64>) -> Result<Tensor, TensorError> {
    if t.order() != 2 {
        return Err(TensorError::WrongShape {
            expected: 2,
            got: t.order(),
            what: "two slots",
        });
    }
    if j.nrows() != t.dim() {
        return Err(TensorError::DimensionMismatch {
            left: t.dim(),
            right: j.nrows(),
        });
    }
    Ok(compose_j_unchecked(t, j))
}

pub(crate) fn compose_j_unchecked(t: &Tensor, j: &DMatrix<f64>) -> Tensor {
    let tm = t.to_matrix();
    let out = j.transpose() * tm;
    Tensor::from_fn(t.dim(), t.variance.clone(), |ix| out[(ix[0], ix[1])])
}
