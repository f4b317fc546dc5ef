use hermiflow::algebra::LieAlgebraSpec;
use hermiflow::flow::{check_variation, flow_rhs};
use hermiflow::geometry::{levi_civita, Geometry};
use hermiflow::hermitian::AlmostHermitianPair;
use hermiflow::identities::scaling_residual;
use hermiflow::tensor::{
    compose_j, contract, frame_norm, j_conjugate, oracle_contract, oracle_norm, part_02, part_11, project_j,
    project_sym_skew, skew, sym, Tensor, Variance,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pair(seed: u64, dim: usize) -> AlmostHermitianPair {
    AlmostHermitianPair::random(&mut ChaCha8Rng::seed_from_u64(seed), dim)
}

fn tensor(seed: u64, dim: usize, variance: Vec<Variance>) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let len = dim.pow(variance.len() as u32);
    let data = (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect();
    Tensor::from_data(dim, variance, data).unwrap()
}

fn bilinear(seed: u64, dim: usize) -> Tensor {
    tensor(seed, dim, vec![Variance::Lower; 2])
}

fn variance_strategy() -> impl Strategy<Value = Vec<Variance>> {
    prop::collection::vec(prop_oneof![Just(Variance::Lower), Just(Variance::Upper)], 2..=4)
}

fn catalog_algebra(i: usize) -> LieAlgebraSpec {
    match i % 3 {
        0 => LieAlgebraSpec::abelian(4),
        1 => LieAlgebraSpec::heisenberg_r(),
        _ => LieAlgebraSpec::su2_r(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn contraction_matches_oracle(seed in any::<u64>(), d in 0usize..3, variance in variance_strategy(), a in 0usize..4, b in 0usize..4) {
        let dim = [2, 4, 6][d];
        let order = variance.len();
        let (a, b) = (a % order, b % order);
        prop_assume!(a != b);
        let t = tensor(seed, dim, variance);
        let p = pair(seed, dim);
        let fast = contract(&t, a, b, p.metric()).unwrap();
        let slow = oracle_contract(&t, a, b, p.metric()).unwrap();
        prop_assert!(fast.max_abs_diff(&slow) <= 1e-13 * slow.max_abs().max(1.0));
    }

    #[test]
    fn norm_matches_oracle(seed in any::<u64>(), d in 0usize..3, variance in variance_strategy()) {
        let dim = [2, 4, 6][d];
        let t = tensor(seed, dim, variance);
        let p = pair(seed, dim);
        let (fast, slow) = (frame_norm(&t, p.metric()), oracle_norm(&t, p.metric()));
        prop_assert!((fast - slow).abs() <= 1e-13 * slow);
    }

    #[test]
    fn projections_commute_and_decompose(seed in any::<u64>(), d in 0usize..3) {
        let dim = [2, 4, 6][d];
        let h = bilinear(seed, dim);
        let j = pair(seed, dim).j().clone();
        let (s, k) = project_sym_skew(&h).unwrap();
        prop_assert!(s.add(&k).unwrap().max_abs_diff(&h) <= 1e-15);
        let (p11, p02) = project_j(&h, &j).unwrap();
        prop_assert!(p11.add(&p02).unwrap().max_abs_diff(&h) <= 1e-12);
        prop_assert!(sym(&part_11(&h, &j)).max_abs_diff(&part_11(&sym(&h), &j)) <= 1e-12);
        prop_assert!(skew(&part_02(&h, &j)).max_abs_diff(&part_02(&skew(&h), &j)) <= 1e-12);
        // idempotence and orthogonality of the J split
        prop_assert!(part_11(&p11, &j).max_abs_diff(&p11) <= 1e-11);
        prop_assert!(part_11(&p02, &j).max_abs() <= 1e-11);
        prop_assert!(j_conjugate(&j_conjugate(&h, &j), &j).max_abs_diff(&h) <= 1e-11);
    }

    #[test]
    fn composing_j_twice_negates(seed in any::<u64>(), d in 0usize..3) {
        let dim = [2, 4, 6][d];
        let h = bilinear(seed, dim);
        let j = pair(seed, dim).j().clone();
        let twice = compose_j(&compose_j(&h, &j).unwrap(), &j).unwrap();
        prop_assert!(twice.max_abs_diff(&h.scale(-1.0)) <= 1e-11 * h.max_abs().max(1.0) * j.amax().powi(2));
    }

    #[test]
    fn frame_change_round_trips(seed in any::<u64>(), variance in variance_strategy()) {
        let t = tensor(seed, 4, variance);
        let p = pair(seed, 4);
        let m = p.metric();
        let back = t.to_frame(m.orthonormal_basis(), m.orthonormal_dual())
            .from_frame(m.orthonormal_basis(), m.orthonormal_dual());
        prop_assert!(back.max_abs_diff(&t) <= 1e-11 * t.max_abs().max(1.0));
    }

    #[test]
    fn levi_civita_is_torsion_free_and_metric(seed in any::<u64>(), a in 0usize..3) {
        let algebra = catalog_algebra(a);
        let p = pair(seed, 4);
        let geo = Geometry::new(&algebra, &p, 2);
        prop_assert!(geo.conn.torsion_residual(&geo.algebra) <= 1e-12);
        prop_assert!(geo.conn.metric_residual(geo.pair.metric()) <= 1e-12);
        // in coordinates as well, against the raw metric
        let raw = levi_civita(&algebra, p.metric());
        prop_assert!(raw.torsion_residual(&algebra) <= 1e-10);
    }

    #[test]
    fn flow_rhs_is_tangent(seed in any::<u64>(), a in 0usize..3) {
        let algebra = catalog_algebra(a);
        let p = pair(seed, 4);
        let rhs = flow_rhs(&p, &algebra);
        prop_assert!(check_variation(&p, &rhs.variation).max() <= 1e-10);
        // dJ/dt anticommutes with J, and J^T g J = g is preserved to first order
        let j = p.j();
        let k = &rhs.k_endo;
        prop_assert!((k * j + j * k).amax() <= 1e-10);
        let h = rhs.variation.h.to_matrix();
        let d_compat = k.transpose() * p.g() * j + j.transpose() * &h * j + j.transpose() * p.g() * k - &h;
        prop_assert!(d_compat.amax() <= 1e-10);
    }

    #[test]
    fn scaling_covariance(seed in any::<u64>(), a in 0usize..3, c in 0.25f64..8.0) {
        let algebra = catalog_algebra(a);
        let p = pair(seed, 4);
        let scale = flow_rhs(&p, &algebra).variation.h.max_abs().max(1.0);
        prop_assert!(scaling_residual(&algebra, &p, c) <= 1e-11 * scale);
    }
}
