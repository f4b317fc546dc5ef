//! Left-invariant differential geometry from structure constants.
//!
//! Every tensor here has constant components in the frame, so covariant
//! derivatives reduce to connection-coefficient algebra. The free functions
//! work in any frame; [`Geometry`] bundles the evaluations in the pair's own
//! g-orthonormal frame, which is where all frame sums are taken.

use nalgebra::{DMatrix, DVector};

use crate::algebra::LieAlgebraSpec;
use crate::hermitian::AlmostHermitianPair;
use crate::tensor::{contract, frame_norm, Metric, Tensor, Variance};

/// Levi-Civita connection: `nabla_{e_i} e_j = sum_k gamma(k, i, j) e_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    gamma: Tensor,
}

impl Connection {
    pub fn gamma(&self) -> &Tensor {
        &self.gamma
    }

    #[inline]
    pub fn coeff(&self, k: usize, i: usize, j: usize) -> f64 {
        let n = self.gamma.dim();
        self.gamma.data()[(k * n + i) * n + j]
    }

    /// Max of `|gamma(k,i,j) - gamma(k,j,i) - c(k,i,j)|`.
    pub fn torsion_residual(&self, algebra: &LieAlgebraSpec) -> f64 {
        let n = algebra.dim();
        let mut worst: f64 = 0.0;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let r = self.coeff(k, i, j) - self.coeff(k, j, i) - algebra.c(k, i, j);
                    worst = worst.max(r.abs());
                }
            }
        }
        worst
    }

    /// Max of `|<nabla_i e_j, e_k> + <e_j, nabla_i e_k>|`.
    pub fn metric_residual(&self, metric: &Metric) -> f64 {
        let lowered = self.gamma.lower(0, metric);
        let n = metric.dim();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    // lowered is indexed (k, i, j) = <nabla_i e_j, e_k>
                    let r = lowered.get(&[k, i, j]) + lowered.get(&[j, i, k]);
                    worst = worst.max(r.abs());
                }
            }
        }
        worst
    }
}

/// Koszul formula for left-invariant fields:
/// `2<nabla_X Y, Z> = <[X,Y],Z> - <[Y,Z],X> + <[Z,X],Y>`.
pub fn levi_civita(algebra: &LieAlgebraSpec, metric: &Metric) -> Connection {
    let n = algebra.dim();
    let g = metric.g();
    // bracket lowered: b(i, j, k) = <[e_i, e_j], e_k>
    let b = |i: usize, j: usize, k: usize| -> f64 { (0..n).map(|m| algebra.c(m, i, j) * g[(m, k)]).sum() };
    let mut low = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                low[(i * n + j) * n + k] = 0.5 * (b(i, j, k) - b(j, k, i) + b(k, i, j));
            }
        }
    }
    let g_inv = metric.g_inv();
    let gamma = Tensor::from_fn(n, vec![Variance::Upper, Variance::Lower, Variance::Lower], |ix| {
        let (l, i, j) = (ix[0], ix[1], ix[2]);
        (0..n).map(|k| g_inv[(l, k)] * low[(i * n + j) * n + k]).sum()
    });
    Connection { gamma }
}

/// Covariant derivative of a left-invariant tensor. The new derivative slot
/// is placed first.
pub fn cov_derivative(t: &Tensor, conn: &Connection) -> Tensor {
    let n = t.dim();
    let r = t.order();
    let mut variance = Vec::with_capacity(r + 1);
    variance.push(Variance::Lower);
    variance.extend_from_slice(t.variance());
    let mut src = vec![0usize; r];
    Tensor::from_fn(n, variance, |ix| {
        let x = ix[0];
        let slots = &ix[1..];
        let mut acc = 0.0;
        for s in 0..r {
            src.copy_from_slice(slots);
            let a = slots[s];
            match t.variance()[s] {
                Variance::Lower => {
                    for k in 0..n {
                        let gk = conn.coeff(k, x, a);
                        if gk != 0.0 {
                            src[s] = k;
                            acc -= gk * t.get(&src);
                        }
                    }
                }
                Variance::Upper => {
                    for k in 0..n {
                        let gk = conn.coeff(a, x, k);
                        if gk != 0.0 {
                            src[s] = k;
                            acc += gk * t.get(&src);
                        }
                    }
                }
            }
        }
        acc
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureData {
    /// `Rm(X, Y, Z, W) = <Rm(X, Y) Z, W>`.
    pub rm: Tensor,
    pub ric: Tensor,
}

impl CurvatureData {
    /// Worst violation of the antisymmetries, pair symmetry and first Bianchi identity.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.rm.dim();
        let r = |i, j, k, l| self.rm.get(&[i, j, k, l]);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = r(i, j, k, l);
                        worst = worst
                            .max((v + r(j, i, k, l)).abs())
                            .max((v + r(i, j, l, k)).abs())
                            .max((v - r(k, l, i, j)).abs())
                            .max((v + r(j, k, i, l) + r(k, i, j, l)).abs());
                    }
                }
            }
        }
        worst
    }

    pub fn ric_asymmetry(&self) -> f64 {
        self.ric.max_abs_diff(&self.ric.transpose())
    }
}

/// `Rm(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z` and
/// `Ric(X, Y) = sum_i <Rm(e_i, X) Y, e_i>` over an orthonormal frame.
pub fn curvature(conn: &Connection, algebra: &LieAlgebraSpec, metric: &Metric) -> CurvatureData {
    let n = algebra.dim();
    let g = metric.g();
    // r_up(l, i, j, k): component l of Rm(e_i, e_j) e_k
    let mut r_up = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut acc = 0.0;
                    for m in 0..n {
                        acc += conn.coeff(m, j, k) * conn.coeff(l, i, m)
                            - conn.coeff(m, i, k) * conn.coeff(l, j, m)
                            - algebra.c(m, i, j) * conn.coeff(l, m, k);
                    }
                    r_up[((l * n + i) * n + j) * n + k] = acc;
                }
            }
        }
    }
    let rm = Tensor::lower_from_fn(n, 4, |ix| {
        let (i, j, k, w) = (ix[0], ix[1], ix[2], ix[3]);
        (0..n).map(|l| r_up[((l * n + i) * n + j) * n + k] * g[(l, w)]).sum()
    });
    let ric = contract(&rm, 0, 3, metric).expect("well-formed curvature tensor");
    CurvatureData { rm, ric }
}

/// Iterated covariant derivatives of `J` (in lowered form, i.e. of `omega`)
/// plus the rough Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct DjBundle {
    /// `derivs[k-1]` is `D^k J` lowered: `(D^k J)(x_1..x_k, a, b) = <(D^k_{x..} J) a, b>`.
    pub derivs: Vec<Tensor>,
    /// `(Delta J)(X, Y) = <(Delta J) X, Y>`.
    pub laplacian: Tensor,
}

impl DjBundle {
    pub fn dj(&self) -> &Tensor {
        &self.derivs[0]
    }

    pub fn d2j(&self) -> &Tensor {
        &self.derivs[1]
    }
}

/// `D J, ..., D^{k_max} J` and `Delta J = tr D^2 J`. At least two derivatives
/// are always computed since the Laplacian needs them.
pub fn dj_bundle(pair: &AlmostHermitianPair, conn: &Connection, k_max: usize) -> DjBundle {
    let k = k_max.max(2);
    let mut derivs = Vec::with_capacity(k);
    let mut cur = pair.omega();
    for _ in 0..k {
        cur = cov_derivative(&cur, conn);
        derivs.push(cur.clone());
    }
    let laplacian = contract(&derivs[1], 0, 1, pair.metric()).expect("order-4 tensor");
    DjBundle { derivs, laplacian }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nijenhuis {
    /// `endo(i, j, k)`: component `k` of `N(e_i, e_j)`.
    pub endo: Tensor,
    /// `low(X, Y, Z) = <N(X, Y), Z>`.
    pub low: Tensor,
}

/// `N(X,Y) = [JX,JY] - [X,Y] - J[JX,Y] - J[X,JY]` on frame vectors.
pub fn nijenhuis(pair: &AlmostHermitianPair, algebra: &LieAlgebraSpec) -> Nijenhuis {
    let n = algebra.dim();
    let j = pair.j();
    let e = |i: usize| DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
    let mut values = vec![DVector::zeros(n); n * n];
    for a in 0..n {
        for b in 0..n {
            let (x, y) = (e(a), e(b));
            let (jx, jy) = (j * &x, j * &y);
            let v = algebra.bracket(&jx, &jy)
                - algebra.bracket(&x, &y)
                - j * algebra.bracket(&jx, &y)
                - j * algebra.bracket(&x, &jy);
            values[a * n + b] = v;
        }
    }
    let endo = Tensor::from_fn(n, vec![Variance::Lower, Variance::Lower, Variance::Upper], |ix| {
        values[ix[0] * n + ix[1]][ix[2]]
    });
    let low = endo.lower(2, pair.metric());
    Nijenhuis { endo, low }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaDerivatives {
    /// `d omega` from the Chevalley–Eilenberg formula.
    pub d_omega: Tensor,
    /// `d omega` as the cyclic sum of `<(D_X J) Y, Z>`.
    pub d_omega_covariant: Tensor,
    pub d_omega_plus: Tensor,
    /// `H(X,Y,Z) = -d omega(JX, JY, JZ)`.
    pub h: Tensor,
    /// Max entry of the difference between the two routes to `d omega`.
    pub cross_check: f64,
}

/// Apply `J` to the listed slots of an all-lower tensor: `T(.., J X, ..)`.
pub fn apply_j_to_slots(t: &Tensor, j: &DMatrix<f64>, slots: &[usize]) -> Tensor {
    slots
        .iter()
        .fold(t.clone(), |acc, &s| acc.map_slot(s, j, Variance::Lower))
}

pub fn omega_derivatives(pair: &AlmostHermitianPair, algebra: &LieAlgebraSpec, dj: &Tensor) -> OmegaDerivatives {
    let n = algebra.dim();
    let omega = pair.omega();
    let w = |u: &DVector<f64>, k: usize| -> f64 { (0..n).map(|m| u[m] * omega.get(&[m, k])).sum() };
    let bracket_col = |i: usize, j: usize| DVector::from_fn(n, |k, _| algebra.c(k, i, j));
    let d_omega = Tensor::lower_from_fn(n, 3, |ix| {
        let (x, y, z) = (ix[0], ix[1], ix[2]);
        -w(&bracket_col(x, y), z) - w(&bracket_col(y, z), x) - w(&bracket_col(z, x), y)
    });
    let d_omega_covariant = Tensor::lower_from_fn(n, 3, |ix| {
        let (x, y, z) = (ix[0], ix[1], ix[2]);
        dj.get(&[x, y, z]) + dj.get(&[y, z, x]) + dj.get(&[z, x, y])
    });
    let cross_check = d_omega.max_abs_diff(&d_omega_covariant);
    let j = pair.j();
    let plus_terms = Tensor::combine(&[
        (3.0, &d_omega),
        (1.0, &apply_j_to_slots(&d_omega, j, &[0, 1])),
        (1.0, &apply_j_to_slots(&d_omega, j, &[0, 2])),
        (1.0, &apply_j_to_slots(&d_omega, j, &[1, 2])),
    ])
    .expect("same shape");
    let d_omega_plus = plus_terms.scale(0.25);
    let h = apply_j_to_slots(&d_omega, j, &[0, 1, 2]).scale(-1.0);
    OmegaDerivatives {
        d_omega,
        d_omega_covariant,
        d_omega_plus,
        h,
        cross_check,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LieDerivative {
    /// `(L_X g)(Y, Z)`.
    pub g: Tensor,
    /// `L_X J` as a matrix in the same convention as `J`.
    pub j_endo: DMatrix<f64>,
    /// `(L_X J)(Y, Z) = g((L_X J) Y, Z)`.
    pub j: Tensor,
}

/// `(L_X J) Y = [X, JY] - J[X, Y]` and `(L_X g)(Y, Z) = -g([X,Y],Z) - g(Y,[X,Z])`.
pub fn lie_derivative(x: &DVector<f64>, pair: &AlmostHermitianPair, algebra: &LieAlgebraSpec) -> LieDerivative {
    let ad = algebra.ad(x);
    let g = pair.g();
    let j = pair.j();
    let lg = -(ad.transpose() * g + g * &ad);
    let lj = &ad * j - j * &ad;
    LieDerivative {
        g: Tensor::from_bilinear(&lg),
        j: endo_to_bilinear(&lj, g),
        j_endo: lj,
    }
}

/// `T(X, Y) = g(T X, Y)`.
pub fn endo_to_bilinear(t: &DMatrix<f64>, g: &DMatrix<f64>) -> Tensor {
    Tensor::from_bilinear(&(t.transpose() * g))
}

/// Inverse of [`endo_to_bilinear`].
pub fn bilinear_to_endo(t: &Tensor, g_inv: &DMatrix<f64>) -> DMatrix<f64> {
    g_inv * t.to_matrix().transpose()
}

/// `D Rm, ..., D^{k_max} Rm`.
pub fn higher_rm(rm: &Tensor, conn: &Connection, k_max: usize) -> Vec<Tensor> {
    let mut out = Vec::with_capacity(k_max);
    let mut cur = rm.clone();
    for _ in 0..k_max {
        cur = cov_derivative(&cur, conn);
        out.push(cur.clone());
    }
    out
}

/// All left-invariant geometry of a pair, evaluated in its g-orthonormal frame.
#[derive(Debug, Clone)]
pub struct Geometry {
    /// Algebra rewritten in the orthonormal frame.
    pub algebra: LieAlgebraSpec,
    /// Pair in the orthonormal frame (`g = I`).
    pub pair: AlmostHermitianPair,
    /// Columns: the orthonormal frame in coordinates.
    pub basis: DMatrix<f64>,
    pub dual: DMatrix<f64>,
    pub conn: Connection,
    pub curvature: CurvatureData,
    pub dj: DjBundle,
    pub nijenhuis: Nijenhuis,
    pub omega: OmegaDerivatives,
    /// `D N` of the lowered Nijenhuis tensor.
    pub dn: Tensor,
}

impl Geometry {
    /// Evaluate everything needed by the flow with `D^k J` up to `k_max`.
    pub fn new(algebra: &LieAlgebraSpec, pair: &AlmostHermitianPair, k_max: usize) -> Geometry {
        let (algebra_on, pair_on) = pair.orthonormalize(algebra);
        let basis = pair.metric().orthonormal_basis().clone();
        let dual = pair.metric().orthonormal_dual().clone();
        Self::from_orthonormal(algebra_on, pair_on, basis, dual, k_max)
    }

    fn from_orthonormal(
        algebra: LieAlgebraSpec,
        pair: AlmostHermitianPair,
        basis: DMatrix<f64>,
        dual: DMatrix<f64>,
        k_max: usize,
    ) -> Geometry {
        let metric = pair.metric();
        let conn = levi_civita(&algebra, metric);
        let curvature = curvature(&conn, &algebra, metric);
        let dj = dj_bundle(&pair, &conn, k_max);
        let nijenhuis = nijenhuis(&pair, &algebra);
        let omega = omega_derivatives(&pair, &algebra, dj.dj());
        let dn = cov_derivative(&nijenhuis.low, &conn);
        Geometry {
            algebra,
            pair,
            basis,
            dual,
            conn,
            curvature,
            dj,
            nijenhuis,
            omega,
            dn,
        }
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }

    /// `J` in the orthonormal frame.
    pub fn j(&self) -> &DMatrix<f64> {
        self.pair.j()
    }

    /// Components of an all-lower orthonormal-frame tensor in coordinates.
    pub fn to_coordinates(&self, t: &Tensor) -> Tensor {
        t.from_frame(&self.basis, &self.dual)
    }

    pub fn norm(&self, t: &Tensor) -> f64 {
        frame_norm(t, self.pair.metric())
    }

    pub fn higher_rm(&self, k_max: usize) -> Vec<Tensor> {
        higher_rm(&self.curvature.rm, &self.conn, k_max)
    }
}
