//! The tensor-identity suite: every structural identity the flow relies on,
//! evaluated on a single pair and reported as named residuals.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::algebra::LieAlgebraSpec;
use crate::flow::{check_variation, flow_rhs, flow_rhs_orthonormal, FlowTensorSet, VariationPair};
use crate::geometry::{apply_j_to_slots, lie_derivative, Geometry};
use crate::hermitian::AlmostHermitianPair;
use crate::tensor::{compose_j_unchecked, part_02, part_11, skew, sym, Tensor};

/// Below this norm `N` (resp. `(d omega)^+`) counts as vanishing for the
/// biconditional checks.
pub const VANISHING: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityResidual {
    pub name: &'static str,
    pub value: f64,
}

fn r(name: &'static str, value: f64) -> IdentityResidual {
    IdentityResidual { name, value }
}

/// `A(X, Y, Z) = <(D_{JX} J) Y, Z>` and `B(X, Y, Z) = <J (D_X J) Y, Z>` in
/// the orthonormal frame.
fn gauduchon_terms(geo: &Geometry) -> (Tensor, Tensor) {
    let j = geo.j();
    let dj = geo.dj.dj();
    let djx = apply_j_to_slots(dj, j, &[0]);
    let n = geo.dim();
    // <J w, Z> = sum_l J(Z, l) w_l
    let jdj = Tensor::lower_from_fn(n, 3, |ix| {
        (0..n).map(|l| j[(ix[2], l)] * dj.get(&[ix[0], ix[1], l])).sum()
    });
    (djx, jdj)
}

/// Evaluate every identity on one pair.
pub fn identity_suite(algebra: &LieAlgebraSpec, pair: &AlmostHermitianPair) -> Vec<IdentityResidual> {
    let geo = Geometry::new(algebra, pair, 2);
    let set = FlowTensorSet::assemble(&geo);
    let mut out = suite_on(&geo, &set, algebra);
    out.push(r("scaling covariance", scaling_residual(algebra, pair, 4.0)));
    out
}

/// Under `g -> c g` the bilinear `h` is unchanged and `K` as an endomorphism
/// scales by `1/c`. Both sides are recomputed from scratch.
pub fn scaling_residual(algebra: &LieAlgebraSpec, pair: &AlmostHermitianPair, c: f64) -> f64 {
    let base = flow_rhs(pair, algebra);
    let scaled = match pair.scaled(c) {
        Ok(p) => flow_rhs(&p, algebra),
        Err(_) => return f64::INFINITY,
    };
    let dh = scaled.variation.h.max_abs_diff(&base.variation.h);
    let dk = (scaled.k_endo * c - base.k_endo).amax();
    dh.max(dk)
}

pub fn suite_on(geo: &Geometry, set: &FlowTensorSet, algebra: &LieAlgebraSpec) -> Vec<IdentityResidual> {
    let n = geo.dim();
    let j = geo.j();
    let dj = geo.dj.dj();
    let tj = |t: &Tensor| compose_j_unchecked(t, j);
    let mut out = vec![
        r("jacobi", algebra.jacobi_residual()),
        r("connection torsion-free", geo.conn.torsion_residual(&geo.algebra)),
        r("connection metric", geo.conn.metric_residual(geo.pair.metric())),
        r("curvature symmetries + Bianchi", geo.curvature.symmetry_residual()),
        r("Ric symmetric", geo.curvature.ric_asymmetry()),
        r("d omega two routes", geo.omega.cross_check),
    ];

    // projections commute on a generic bilinear form
    let probe =
        Tensor::combine(&[(1.0, &set.b4), (1.0, &geo.dj.laplacian), (0.5, &geo.curvature.ric)]).expect("bilinear");
    let a = sym(&part_11(&probe, j))
        .sub(&part_11(&sym(&probe), j))
        .expect("bilinear");
    let b = skew(&part_02(&probe, j))
        .sub(&part_02(&skew(&probe), j))
        .expect("bilinear");
    out.push(r("sym/skew and J projections commute", a.max_abs().max(b.max_abs())));

    // <(KJ + JK) X, Y> = 2 K^(1,1)(JX, Y) for any K
    let k = &probe;
    let kj_jk = {
        // bilinear of KJ is K(JX, Y); bilinear of JK is <J K X, Y> = -K(X, JY)
        let kjx = tj(k);
        let kjy = tj(&k.transpose()).transpose();
        kjx.sub(&kjy).expect("bilinear")
    };
    out.push(r(
        "KJ+JK = 2 K^(1,1)(J., .)",
        kj_jk.max_abs_diff(&tj(&part_11(k, j)).scale(2.0)),
    ));

    // DJ is skew and anticommutes with J
    let skew_res = Tensor::lower_from_fn(n, 3, |ix| dj.get(ix) + dj.get(&[ix[0], ix[2], ix[1]])).max_abs();
    out.push(r("<(D_X J)Y,Z> = -<(D_X J)Z,Y>", skew_res));
    // (D_X J) J Y + J (D_X J) Y, paired with Z
    let anti = {
        let djjy = apply_j_to_slots(dj, j, &[1]);
        let (_, jdj) = gauduchon_terms(geo);
        djjy.add(&jdj).expect("order 3").max_abs()
    };
    out.push(r("(D_X J)J = -J(D_X J)", anti));

    // D_{JX} J against J D_X J, split by N and (d omega)+
    let (djx, jdj) = gauduchon_terms(geo);
    let nl = &geo.nijenhuis.low;
    let n_combo = Tensor::lower_from_fn(n, 3, |ix| {
        let (x, y, z) = (ix[0], ix[1], ix[2]);
        0.5 * (nl.get(&[x, y, z]) + nl.get(&[z, x, y]) - nl.get(&[y, z, x]))
    });
    let minus = djx.sub(&jdj).expect("order 3");
    out.push(r("Gauduchon: D_JX J - J D_X J via N", minus.max_abs_diff(&n_combo)));
    let plus = djx.add(&jdj).expect("order 3");
    let dplus = &set.d_omega_plus;
    let dplus_combo = apply_j_to_slots(dplus, j, &[0])
        .sub(&apply_j_to_slots(dplus, j, &[0, 1, 2]))
        .expect("order 3");
    out.push(r(
        "Gauduchon: D_JX J + J D_X J via (d omega)+",
        plus.max_abs_diff(&dplus_combo),
    ));
    out.push(r(
        "D_JX J = J D_X J <=> N = 0",
        biconditional(geo.norm(nl), geo.norm(&minus)),
    ));
    out.push(r(
        "D_JX J = -J D_X J <=> (d omega)+ = 0",
        biconditional(geo.norm(dplus), geo.norm(&plus)),
    ));
    out.push(r(
        "N antisymmetric",
        Tensor::lower_from_fn(n, 3, |ix| nl.get(ix) + nl.get(&[ix[1], ix[0], ix[2]])).max_abs(),
    ));

    // Lie derivatives along the frame, a generic vector and theta#
    let mut lie_worst: f64 = 0.0;
    let mut vectors: Vec<DVector<f64>> = (0..n)
        .map(|i| DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 }))
        .collect();
    vectors.push(DVector::from_fn(n, |k, _| {
        0.3 + 0.17 * k as f64 - 0.05 * (k * k) as f64
    }));
    vectors.push(set.theta_sharp.clone());
    for x in &vectors {
        let ld = lie_derivative(x, &geo.pair, &geo.algebra);
        let v = VariationPair { h: ld.g, k: ld.j };
        lie_worst = lie_worst.max(check_variation(&geo.pair, &v).max());
    }
    out.push(r("(L_X g, L_X J) is a variation", lie_worst));

    // pieces of the flow right-hand side
    let lap = &geo.dj.laplacian;
    out.push(r("Delta J skew", lap.max_abs_diff(&lap.transpose().scale(-1.0))));
    out.push(r(
        "N = -(Delta J)^(1,1)",
        set.n_script.max_abs_diff(&part_11(lap, j).scale(-1.0)),
    ));
    out.push(r(
        "N skew",
        set.n_script.max_abs_diff(&set.n_script.transpose().scale(-1.0)),
    ));
    out.push(r(
        "R symmetric and (0,2)+(2,0)",
        set.r_script
            .max_abs_diff(&set.r_script.transpose())
            .max(part_11(&set.r_script, j).max_abs()),
    ));
    out.push(r(
        "RJ = -2 Ric^(0,2)+(2,0)",
        tj(&set.r_script).max_abs_diff(&part_02(&geo.curvature.ric, j).scale(-2.0)),
    ));
    out.push(r("Q1 symmetric", set.q1.max_abs_diff(&set.q1.transpose())));
    out.push(r("Q2 is (0,2)+(2,0)", part_11(&set.q2, j).max_abs()));
    // the only (0,2)+(2,0) term of Q1 is -(B3)^(0,2)+(2,0)
    out.push(r(
        "Q1^(0,2)+(2,0) = -B3^(0,2)+(2,0)",
        part_02(&set.q1, j).max_abs_diff(&part_02(&set.b3, j).scale(-1.0)),
    ));
    out.push(r(
        "(Q1, Q2) is a variation",
        check_variation(
            &geo.pair,
            &VariationPair {
                h: set.q1.clone(),
                k: set.q2.clone(),
            },
        )
        .max(),
    ));
    out.push(r(
        "B1, B2 symmetric positive semidefinite",
        psd_residual(&set.b1).max(psd_residual(&set.b2)),
    ));
    let rhs = flow_rhs_orthonormal(geo, set);
    out.push(r("flow RHS is a variation", check_variation(&geo.pair, &rhs).max()));
    out
}

/// Zero when both norms vanish or both do not; otherwise the offending norm.
fn biconditional(hypothesis: f64, conclusion: f64) -> f64 {
    let h = hypothesis <= VANISHING;
    let c = conclusion <= VANISHING;
    match (h, c) {
        (true, false) => conclusion,
        (false, true) => hypothesis.min(1.0),
        _ => 0.0,
    }
}

fn psd_residual(t: &Tensor) -> f64 {
    let m = t.to_matrix();
    let asym = (&m - m.transpose()).amax();
    let s = (&m + m.transpose()) * 0.5;
    let min_eig = s.symmetric_eigenvalues().iter().fold(f64::INFINITY, |a, &b| a.min(b));
    asym.max((-min_eig).max(0.0))
}

/// Worst residual per identity over a collection of pairs, in suite order.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSummary {
    pub pairs: usize,
    pub worst: Vec<IdentityResidual>,
}

impl SuiteSummary {
    pub fn max(&self) -> f64 {
        self.worst.iter().fold(0.0, |m, r| m.max(r.value))
    }

    pub fn failures(&self, tol: f64) -> Vec<&IdentityResidual> {
        self.worst.iter().filter(|r| !(r.value <= tol)).collect()
    }
}

/// Run the suite on `pair` plus `random` seeded compatible pairs on the same algebra.
/// Random pairs are evaluated in parallel; results are merged in index order.
pub fn run_suite(algebra: &LieAlgebraSpec, pair: &AlmostHermitianPair, random: usize, seed: u64) -> SuiteSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = vec![pair.clone()];
    pairs.extend((0..random).map(|_| AlmostHermitianPair::random(&mut rng, algebra.dim())));
    let results: Vec<Vec<IdentityResidual>> = pairs.par_iter().map(|p| identity_suite(algebra, p)).collect();
    let mut worst = results[0].clone();
    for res in &results[1..] {
        for (w, x) in worst.iter_mut().zip(res) {
            debug_assert_eq!(w.name, x.name);
            if !(x.value <= w.value) {
                w.value = x.value;
            }
        }
    }
    SuiteSummary {
        pairs: pairs.len(),
        worst,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn biconditional_cases() {
        assert_eq!(biconditional(0.0, 0.0), 0.0);
        assert_eq!(biconditional(2.0, 3.0), 0.0);
        assert_eq!(biconditional(0.0, 0.5), 0.5);
        assert_eq!(biconditional(0.5, 0.0), 0.5);
    }

    #[test]
    fn suite_names_are_unique() {
        let res = identity_suite(&LieAlgebraSpec::abelian(4), &AlmostHermitianPair::standard(4));
        let mut names: Vec<_> = res.iter().map(|r| r.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), res.len());
        assert!(res.iter().all(|r| r.value == 0.0), "{res:?}");
    }
}
