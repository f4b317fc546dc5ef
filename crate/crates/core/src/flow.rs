//! The tensors entering the flow and its right-hand side.
//!
//! Everything is assembled in the pair's g-orthonormal frame, so bilinear
//! forms and endomorphisms share components up to a transpose and every
//! frame sum is a plain index sum. Bilinear forms stand for endomorphisms via
//! `T(X, Y) = g(T X, Y)`.

use nalgebra::{DMatrix, DVector};

use crate::algebra::LieAlgebraSpec;
use crate::geometry::{bilinear_to_endo, Geometry};
use crate::hermitian::AlmostHermitianPair;
use crate::tensor::{compose_j_unchecked, part_02, part_11, sym, Tensor};

#[derive(Debug, Clone)]
pub struct FlowTensorSet {
    pub b1: Tensor,
    pub b2: Tensor,
    pub b3: Tensor,
    pub b4: Tensor,
    pub b1_bar: Tensor,
    pub b2_bar: Tensor,
    pub q1: Tensor,
    pub q2: Tensor,
    /// `N = B^2 J`.
    pub n_script: Tensor,
    /// `R(X, Y) = Ric(JX, Y) + Ric(X, JY)`.
    pub r_script: Tensor,
    /// `Q = B^2 J + B^3 J`.
    pub q_script: Tensor,
    /// `B(X, Y) = H(X, i, j) H(Y, i, j)`.
    pub b_script: Tensor,
    pub theta_sharp: DVector<f64>,
    /// `Nbar = 1/2 P1 - 1/4 P2 - P3` with the groups of [`n_bar_parts`].
    /// The `(D_X J) e_i` group carries `1/4`: summed over a frame,
    /// `<(D_{J e_i} J)(D_X J) e_i, Y> = -<J (D_i J)(D_X J) e_i, Y>`, which
    /// halves that group relative to the `(D_i J) X` group.
    pub n_bar: Tensor,
    /// `K(X, Y) = <(D_i N)(J e_i, X), Y>`.
    pub k_script: Tensor,
    pub h: Tensor,
    pub d_omega_plus: Tensor,
}

/// Index helper over the lowered `D J`: `dj(x, a, b) = <(D_x J) e_a, e_b>`.
struct Dj<'a> {
    n: usize,
    data: &'a [f64],
}

impl Dj<'_> {
    #[inline]
    fn at(&self, x: usize, a: usize, b: usize) -> f64 {
        self.data[(x * self.n + a) * self.n + b]
    }

    /// `(D_u J) w` for arbitrary vectors.
    fn apply(&self, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut out = DVector::zeros(n);
        for x in 0..n {
            if u[x] == 0.0 {
                continue;
            }
            for a in 0..n {
                let c = u[x] * w[a];
                if c == 0.0 {
                    continue;
                }
                for b in 0..n {
                    out[b] += c * self.at(x, a, b);
                }
            }
        }
        out
    }
}

fn unit(n: usize, i: usize) -> DVector<f64> {
    DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 })
}

/// Bilinear form of an orthonormal-frame endomorphism given column-wise by
/// `f(X) = image of e_X`.
fn bilinear_from_images(n: usize, mut f: impl FnMut(usize) -> DVector<f64>) -> Tensor {
    let cols: Vec<DVector<f64>> = (0..n).map(&mut f).collect();
    Tensor::lower_from_fn(n, 2, |ix| cols[ix[0]][ix[1]])
}

/// Trilinear Nijenhuis form `<N(u, v), w>` extended to arbitrary vectors.
fn n3(nl: &Tensor, u: &DVector<f64>, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
    let n = nl.dim();
    let d = nl.data();
    let mut acc = 0.0;
    for a in 0..n {
        if u[a] == 0.0 {
            continue;
        }
        for b in 0..n {
            let c = u[a] * v[b];
            if c == 0.0 {
                continue;
            }
            for k in 0..n {
                acc += c * w[k] * d[(a * n + b) * n + k];
            }
        }
    }
    acc
}

impl FlowTensorSet {
    pub fn assemble(geo: &Geometry) -> FlowTensorSet {
        let n = geo.dim();
        let j = geo.j();
        let dj = Dj {
            n,
            data: geo.dj.dj().data(),
        };
        // jm(m, i) = component m of J e_i
        let jm = |m: usize, i: usize| j[(m, i)];

        let b1 = Tensor::lower_from_fn(n, 2, |ix| {
            let (x, y) = (ix[0], ix[1]);
            let mut s = 0.0;
            for i in 0..n {
                for k in 0..n {
                    s += dj.at(x, i, k) * dj.at(y, i, k);
                }
            }
            s
        });
        let b2 = Tensor::lower_from_fn(n, 2, |ix| {
            let (x, y) = (ix[0], ix[1]);
            let mut s = 0.0;
            for i in 0..n {
                for k in 0..n {
                    s += dj.at(i, x, k) * dj.at(i, y, k);
                }
            }
            s
        });
        // <(D_{(D_i J) X} J) e_i, Y>
        let b3 = Tensor::lower_from_fn(n, 2, |ix| {
            let (x, y) = (ix[0], ix[1]);
            let mut s = 0.0;
            for i in 0..n {
                for l in 0..n {
                    s += dj.at(i, x, l) * dj.at(l, i, y);
                }
            }
            s
        });
        let b4 = Tensor::lower_from_fn(n, 2, |ix| {
            let (x, y) = (ix[0], ix[1]);
            let mut s = 0.0;
            for i in 0..n {
                for k in 0..n {
                    s += dj.at(x, i, k) * dj.at(i, y, k);
                }
            }
            s
        });
        // <(D_X J) e_i, (D_Y J) J e_i>
        let b1_bar = Tensor::lower_from_fn(n, 2, |ix| {
            let (x, y) = (ix[0], ix[1]);
            let mut s = 0.0;
            for i in 0..n {
                for k in 0..n {
                    let rhs: f64 = (0..n).map(|m| jm(m, i) * dj.at(y, m, k)).sum();
                    s += dj.at(x, i, k) * rhs;
                }
            }
            s
        });
        // <(D_i J) X, (D_{J e_i} J) Y>
        let b2_bar = Tensor::lower_from_fn(n, 2, |ix| {
            let (x, y) = (ix[0], ix[1]);
            let mut s = 0.0;
            for i in 0..n {
                for k in 0..n {
                    let rhs: f64 = (0..n).map(|m| jm(m, i) * dj.at(m, y, k)).sum();
                    s += dj.at(i, x, k) * rhs;
                }
            }
            s
        });

        let tj = |t: &Tensor| compose_j_unchecked(t, j);
        let q1 = Tensor::combine(&[
            (-0.5, &part_11(&b1, j)),
            (-1.0, &part_02(&b3, j)),
            (4.0, &sym(&part_11(&b4, j))),
            (-1.0, &part_11(&tj(&b1_bar), j)),
            (-1.0, &tj(&b2_bar)),
        ])
        .expect("bilinear forms");
        let q2 = tj(&part_02(&b3, j));
        let n_script = tj(&b2);
        let ric = &geo.curvature.ric;
        let r_script = tj(ric).add(&tj(&ric.transpose()).transpose()).expect("bilinear forms");
        let q_script = tj(&b2).add(&tj(&b3)).expect("bilinear forms");

        let h = geo.omega.h.clone();
        let b_script = Tensor::lower_from_fn(n, 2, |ix| {
            let (x, y) = (ix[0], ix[1]);
            let mut s = 0.0;
            for i in 0..n {
                for k in 0..n {
                    s += h.get(&[x, i, k]) * h.get(&[y, i, k]);
                }
            }
            s
        });

        // theta# = -J (D_i J) e_i
        let trace_dj = DVector::from_fn(n, |k, _| (0..n).map(|i| dj.at(i, i, k)).sum());
        let theta_sharp = -(j * &trace_dj);

        let [p1, p2, p3] = n_bar_parts(geo);
        let n_bar = Tensor::combine(&[(0.5, &p1), (-0.25, &p2), (-1.0, &p3)]).expect("bilinear forms");

        let dn = &geo.dn;
        let k_script = Tensor::lower_from_fn(n, 2, |ix| {
            let (x, y) = (ix[0], ix[1]);
            let mut s = 0.0;
            for i in 0..n {
                for m in 0..n {
                    let c = jm(m, i);
                    if c != 0.0 {
                        s += c * dn.get(&[i, m, x, y]);
                    }
                }
            }
            s
        });

        FlowTensorSet {
            b1,
            b2,
            b3,
            b4,
            b1_bar,
            b2_bar,
            q1,
            q2,
            n_script,
            r_script,
            q_script,
            b_script,
            theta_sharp,
            n_bar,
            k_script,
            h,
            d_omega_plus: geo.omega.d_omega_plus.clone(),
        }
    }

    /// The seven-term expression for `Q` used in the integrable setting:
    /// `-(D_i J)(D_{JX} J) e_i - J (D_{(D_i J) X} J) e_i + (D_i J)(D_{J e_i} J) X
    ///  - (D_{J (D_i J) e_i} J) X + J (D_{(D_i J) e_i} J) X
    ///  + (D_{JX} J)(D_i J) e_i - J (D_X J)(D_i J) e_i`.
    pub fn q_script_seven_term(geo: &Geometry) -> Tensor {
        let n = geo.dim();
        let j = geo.j();
        let dj = Dj {
            n,
            data: geo.dj.dj().data(),
        };
        let v = DVector::from_fn(n, |k, _| (0..n).map(|i| dj.at(i, i, k)).sum::<f64>());
        let jv = j * &v;
        bilinear_from_images(n, |x| {
            let ex = unit(n, x);
            let jx = j * &ex;
            let mut out = DVector::zeros(n);
            for i in 0..n {
                let ei = unit(n, i);
                let a = dj.apply(&jx, &ei);
                out -= dj.apply(&ei, &a);
                let u = dj.apply(&ei, &ex);
                out -= j * dj.apply(&u, &ei);
                let b = dj.apply(&(j * &ei), &ex);
                out += dj.apply(&ei, &b);
            }
            out -= dj.apply(&jv, &ex);
            out += j * dj.apply(&v, &ex);
            out += dj.apply(&jx, &v);
            out -= j * dj.apply(&ex, &v);
            out
        })
    }
}

/// `Nbar` with `-1/2` on the `(D_X J) e_i` group instead of `-1/4`. The Lee
/// gauge identity fails with this variant whenever that group is nonzero; it
/// is kept for comparison in reports.
pub fn n_bar_half_weight(geo: &Geometry) -> Tensor {
    let [p1, p2, p3] = n_bar_parts(geo);
    Tensor::combine(&[(0.5, &p1), (-0.5, &p2), (-1.0, &p3)]).expect("bilinear forms")
}

/// The three groups of `Nbar`: the `(D_i J) X` group, the `(D_X J) e_i`
/// group and `<(D_i J) N(X, e_i), Y>`.
pub fn n_bar_parts(geo: &Geometry) -> [Tensor; 3] {
    let n = geo.dim();
    let dj = Dj {
        n,
        data: geo.dj.dj().data(),
    };
    let nl = &geo.nijenhuis.low;
    let mut parts = [
        Tensor::zeros_lower(n, 2),
        Tensor::zeros_lower(n, 2),
        Tensor::zeros_lower(n, 2),
    ];
    for x in 0..n {
        for y in 0..n {
            let ey = unit(n, y);
            let (mut first, mut second, mut third) = (0.0, 0.0, 0.0);
            for i in 0..n {
                let ei = unit(n, i);
                // u = (D_i J) X, w = (D_X J) e_i
                let u = DVector::from_fn(n, |k, _| dj.at(i, x, k));
                let w = DVector::from_fn(n, |k, _| dj.at(x, i, k));
                first += n3(nl, &u, &ei, &ey) + n3(nl, &ey, &u, &ei) - n3(nl, &ei, &ey, &u);
                second += n3(nl, &ei, &w, &ey) + n3(nl, &ey, &ei, &w) - n3(nl, &w, &ey, &ei);
                for k in 0..n {
                    third += nl.get(&[x, i, k]) * dj.at(i, k, y);
                }
            }
            parts[0].set(&[x, y], first);
            parts[1].set(&[x, y], second);
            parts[2].set(&[x, y], third);
        }
    }
    parts
}

/// `(h, K) = (dg/dt, dJ/dt)` as bilinear forms.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationPair {
    pub h: Tensor,
    pub k: Tensor,
}

/// Flow right-hand side in a given frame, plus `K` as an endomorphism.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRhs {
    pub variation: VariationPair,
    pub k_endo: DMatrix<f64>,
}

/// `h = -2 Ric + Q_1`, `K = Delta J + N + R + Q_2` in the orthonormal frame.
pub fn flow_rhs_orthonormal(geo: &Geometry, set: &FlowTensorSet) -> VariationPair {
    let h = Tensor::combine(&[(-2.0, &geo.curvature.ric), (1.0, &set.q1)]).expect("bilinear forms");
    let k = Tensor::combine(&[
        (1.0, &geo.dj.laplacian),
        (1.0, &set.n_script),
        (1.0, &set.r_script),
        (1.0, &set.q2),
    ])
    .expect("bilinear forms");
    VariationPair { h, k }
}

/// The flow vector field at `pair`, expressed in the coordinate frame.
pub fn flow_rhs(pair: &AlmostHermitianPair, algebra: &LieAlgebraSpec) -> FlowRhs {
    let geo = Geometry::new(algebra, pair, 2);
    let set = FlowTensorSet::assemble(&geo);
    flow_rhs_from(&geo, &set, pair)
}

pub(crate) fn flow_rhs_from(geo: &Geometry, set: &FlowTensorSet, pair: &AlmostHermitianPair) -> FlowRhs {
    let on = flow_rhs_orthonormal(geo, set);
    let h = geo.to_coordinates(&on.h);
    let k = geo.to_coordinates(&on.k);
    let k_endo = bilinear_to_endo(&k, pair.metric().g_inv());
    FlowRhs {
        variation: VariationPair { h, k },
        k_endo,
    }
}

/// Residuals of the necessary conditions for `(h, K)` to be tangent to the
/// space of compatible pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationResiduals {
    /// `h` not symmetric.
    pub h_asymmetry: f64,
    /// `|K^{(1,1)}|`, equivalently the failure of `KJ + JK = 0`.
    pub k_11: f64,
    /// `|K^{sym} J - h^{(0,2)+(2,0)}|`.
    pub compat: f64,
}

impl VariationResiduals {
    pub fn max(&self) -> f64 {
        self.h_asymmetry.max(self.k_11).max(self.compat)
    }
}

/// Check a variation given in the same frame as `pair`.
pub fn check_variation(pair: &AlmostHermitianPair, v: &VariationPair) -> VariationResiduals {
    let j = pair.j();
    VariationResiduals {
        h_asymmetry: v.h.max_abs_diff(&v.h.transpose()),
        k_11: part_11(&v.k, j).max_abs(),
        compat: compose_j_unchecked(&sym(&v.k), j).max_abs_diff(&part_02(&v.h, j)),
    }
}

/// Tolerance at which a reduction hypothesis (`d omega = 0` or `N = 0`) is deemed to hold.
pub const REDUCTION_GATE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub name: &'static str,
    pub value: f64,
}

fn res(name: &'static str, value: f64) -> Residual {
    Residual { name, value }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionReport {
    pub norm_d_omega: f64,
    pub norm_n: f64,
    /// Present when `|d omega| <= REDUCTION_GATE`.
    pub symplectic: Option<Vec<Residual>>,
    /// Present when `|N| <= REDUCTION_GATE`.
    pub integrable: Option<Vec<Residual>>,
}

impl ReductionReport {
    pub fn applies(&self) -> bool {
        self.symplectic.is_some() || self.integrable.is_some()
    }

    pub fn worst(&self) -> f64 {
        self.symplectic
            .iter()
            .chain(self.integrable.iter())
            .flatten()
            .fold(0.0, |m, r| m.max(r.value))
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.worst() <= tol
    }
}

pub fn check_reduction(pair: &AlmostHermitianPair, algebra: &LieAlgebraSpec) -> ReductionReport {
    let geo = Geometry::new(algebra, pair, 2);
    let set = FlowTensorSet::assemble(&geo);
    reduction_report(&geo, &set)
}

pub fn reduction_report(geo: &Geometry, set: &FlowTensorSet) -> ReductionReport {
    let j = geo.j();
    let tj = |t: &Tensor| compose_j_unchecked(t, j);
    let norm_d_omega = geo.norm(&geo.omega.d_omega);
    let norm_n = geo.norm(&geo.nijenhuis.low);

    let symplectic = (norm_d_omega <= REDUCTION_GATE).then(|| {
        let expected_q1 = Tensor::combine(&[(0.5, &set.b1), (-1.0, &set.b2)]).expect("bilinear");
        vec![
            res("Q1 - (B1/2 - B2)", set.q1.max_abs_diff(&expected_q1)),
            res("Q2", set.q2.max_abs()),
            res("B4 - B1/2", set.b4.max_abs_diff(&set.b1.scale(0.5))),
            res("B1^(0,2)+(2,0)", part_02(&set.b1, j).max_abs()),
            res("B3^(0,2)+(2,0)", part_02(&set.b3, j).max_abs()),
            res("B1bar J - B1", tj(&set.b1_bar).max_abs_diff(&set.b1)),
            res("B2bar J - B2", tj(&set.b2_bar).max_abs_diff(&set.b2)),
        ]
    });

    let integrable = (norm_n <= REDUCTION_GATE).then(|| {
        let q_minus_n = set.q_script.sub(&set.n_script).expect("bilinear");
        let expanded = Tensor::combine(&[(0.5, &set.b1), (1.0, &set.b2), (-1.0, &set.b3)]).expect("bilinear");
        let seven = FlowTensorSet::q_script_seven_term(geo);
        vec![
            res("Q1 - B/2", set.q1.max_abs_diff(&set.b_script.scale(0.5))),
            res("Q2 - (Q - N)", set.q2.max_abs_diff(&q_minus_n)),
            res("B4", set.b4.max_abs()),
            res(
                "B/2 - (B1/2 + B2 - B3)",
                set.b_script.scale(0.5).max_abs_diff(&expanded),
            ),
            res("Q - Q(seven-term)", set.q_script.max_abs_diff(&seven)),
            res("B1^(0,2)+(2,0)", part_02(&set.b1, j).max_abs()),
            res("B3^(1,1)", part_11(&set.b3, j).max_abs()),
            res("B1bar - B1 J", set.b1_bar.max_abs_diff(&tj(&set.b1))),
            res("B2bar - B2 J", set.b2_bar.max_abs_diff(&tj(&set.b2))),
        ]
    });

    ReductionReport {
        norm_d_omega,
        norm_n,
        symplectic,
        integrable,
    }
}

/// `|L_{theta#} J - (Delta J + Q + R + K + Nbar)|`.
pub fn check_gauge(pair: &AlmostHermitianPair, algebra: &LieAlgebraSpec) -> f64 {
    let geo = Geometry::new(algebra, pair, 2);
    let set = FlowTensorSet::assemble(&geo);
    gauge_residual(&geo, &set)
}

pub fn gauge_residual(geo: &Geometry, set: &FlowTensorSet) -> f64 {
    let (lhs, rhs) = gauge_sides(geo, set);
    lhs.max_abs_diff(&rhs)
}

/// Both sides of the Lee-form gauge identity as orthonormal-frame bilinear forms.
pub fn gauge_sides(geo: &Geometry, set: &FlowTensorSet) -> (Tensor, Tensor) {
    let lie = crate::geometry::lie_derivative(&set.theta_sharp, &geo.pair, &geo.algebra);
    let rhs = Tensor::combine(&[
        (1.0, &geo.dj.laplacian),
        (1.0, &set.q_script),
        (1.0, &set.r_script),
        (1.0, &set.k_script),
        (1.0, &set.n_bar),
    ])
    .expect("bilinear forms");
    (lie.j, rhs)
}
