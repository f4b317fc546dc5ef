//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach the console; exits nonzero on any failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use hermiflow::algebra::LieAlgebraSpec;
use hermiflow::catalog::{builtin, builtin_names, Scenario};
use hermiflow::flow::{check_gauge, check_reduction, flow_rhs};
use hermiflow::geometry::Geometry;
use hermiflow::hermitian::AlmostHermitianPair;
use hermiflow::identities::run_suite;
use hermiflow::integrator::{detect_blowup, detect_blowup_samples, integrate, IntegratorConfig, Termination};
use hermiflow::tensor::{contract, frame_norm, oracle_contract, oracle_norm, Metric, Tensor, Variance};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Line {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn scenarios() -> Vec<Scenario> {
    builtin_names().into_iter().map(|n| builtin(n).unwrap()).collect()
}

fn identity_suite() -> Line {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut worst_name = "";
    let mut pairs = 0;
    for s in scenarios() {
        let summary = run_suite(&s.algebra, &s.pair, 50, 7);
        pairs += summary.pairs;
        for r in &summary.worst {
            if r.value.is_nan() || r.value > worst {
                worst = r.value;
                worst_name = r.name;
            }
        }
    }
    let elapsed = start.elapsed();
    Line {
        id: 1,
        title: "identity suite",
        pass: worst <= 1e-10 && elapsed < Duration::from_secs(10),
        detail: format!(
            "{pairs} pairs, worst {worst:.2e} ({worst_name}) <= 1e-10, {:.2} s < 10 s",
            elapsed.as_secs_f64()
        ),
    }
}

fn reduction_suite() -> Line {
    let kt = builtin("kodaira_thurston").unwrap();
    let hopf = builtin("hopf_s3s1").unwrap();
    let rk = check_reduction(&kt.pair, &kt.algebra);
    let rh = check_reduction(&hopf.pair, &hopf.algebra);
    let worst = |rows: &Option<Vec<hermiflow::flow::Residual>>| {
        rows.as_ref().map(|r| r.iter().fold(0.0f64, |m, x| m.max(x.value)))
    };
    let kt_worst = worst(&rk.symplectic);
    let hopf_worst = worst(&rh.integrable);
    let seven = rh
        .integrable
        .as_ref()
        .and_then(|r| r.iter().find(|x| x.name.contains("seven-term")).map(|x| x.value));
    let pass = matches!(kt_worst, Some(v) if v <= 1e-10)
        && matches!(hopf_worst, Some(v) if v <= 1e-10)
        && matches!(seven, Some(v) if v <= 1e-10);
    Line {
        id: 2,
        title: "reduction suite",
        pass,
        detail: format!(
            "kodaira_thurston d omega = 0 branch worst {}, hopf_s3s1 N = 0 branch worst {} (Q equality {}) <= 1e-10",
            opt(kt_worst),
            opt(hopf_worst),
            opt(seven)
        ),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "not applicable".to_string(), |v| format!("{v:.2e}"))
}

fn gauge_identity() -> Line {
    let mut parts = Vec::new();
    let mut pass = true;
    for s in scenarios() {
        let r = check_gauge(&s.pair, &s.algebra);
        pass &= r <= 1e-9;
        parts.push(format!("{} {r:.2e}", s.label));
    }
    Line {
        id: 3,
        title: "gauge identity",
        pass,
        detail: format!("{} <= 1e-9", parts.join(", ")),
    }
}

/// `max |K|` and `max |h + 2 Ric|` in coordinates.
fn kahler_residuals(algebra: &LieAlgebraSpec, pair: &AlmostHermitianPair) -> (f64, f64) {
    let rhs = flow_rhs(pair, algebra);
    let geo = Geometry::new(algebra, pair, 2);
    let ric = geo.to_coordinates(&geo.curvature.ric);
    let k = rhs.variation.k.max_abs().max(rhs.k_endo.amax());
    let h = rhs.variation.h.max_abs_diff(&ric.scale(-2.0));
    (k, h)
}

fn kahler_ricci() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let flat = builtin("flat_torus_4").unwrap();
    let (mut k, mut h) = kahler_residuals(&flat.algebra, &flat.pair);
    let abelian = LieAlgebraSpec::abelian(4);
    for _ in 0..50 {
        let p = AlmostHermitianPair::random(&mut rng, 4);
        let (a, b) = kahler_residuals(&abelian, &p);
        k = k.max(a);
        h = h.max(b);
    }
    // every pair on a surface is Kahler; the affine group gives nonzero curvature
    let aff = LieAlgebraSpec::from_brackets("aff", 2, &[(0, 1, 1, 1.0)]).unwrap();
    let mut ric_seen: f64 = 0.0;
    for _ in 0..50 {
        let p = AlmostHermitianPair::random(&mut rng, 2);
        let (a, b) = kahler_residuals(&aff, &p);
        k = k.max(a);
        h = h.max(b);
        let geo = Geometry::new(&aff, &p, 2);
        ric_seen = ric_seen.max(geo.curvature.ric.max_abs());
    }
    Line {
        id: 4,
        title: "Kahler-Ricci reduction",
        pass: k <= 1e-12 && h <= 1e-12 && ric_seen > 0.1,
        detail: format!(
            "flat_torus_4 + 50 abelian + 50 affine-surface pairs: max |K| {k:.2e}, max |h + 2 Ric| {h:.2e} <= 1e-12"
        ),
    }
}

struct Runs {
    kt: hermiflow::integrator::Trajectory,
    hopf: hermiflow::integrator::Trajectory,
    flat: hermiflow::integrator::Trajectory,
}

fn structure_preservation() -> (Line, Runs) {
    let cfg = IntegratorConfig {
        dt: 1e-3,
        t_end: 1.0,
        sample_stride: 1,
        ..IntegratorConfig::default()
    };
    let timed = |name: &str| {
        let s = builtin(name).unwrap();
        let start = Instant::now();
        let traj = integrate(&s, &cfg).unwrap();
        (traj, start.elapsed())
    };
    let (kt, kt_time) = timed("kodaira_thurston");
    let (hopf, hopf_time) = timed("hopf_s3s1");
    let (flat, _) = timed("flat_torus_4");
    let max_of = |t: &hermiflow::integrator::Trajectory, f: fn(&hermiflow::integrator::TrajectorySample) -> f64| {
        t.samples.iter().map(f).fold(0.0, f64::max)
    };
    let compat = max_of(&kt, |s| s.compat_residual);
    let jsq = max_of(&kt, |s| s.jsq_residual);
    let domega = max_of(&kt, |s| s.norm_domega);
    let n = max_of(&hopf, |s| s.norm_n);
    let pass = kt.status == Termination::Completed
        && hopf.status == Termination::Completed
        && compat <= 1e-8
        && jsq <= 1e-8
        && domega <= 1e-8
        && n <= 1e-8
        && kt_time < Duration::from_secs(30)
        && hopf_time < Duration::from_secs(30);
    let line = Line {
        id: 5,
        title: "structure preservation",
        pass,
        detail: format!(
            "kodaira_thurston {} in {:.2} s: compat {compat:.2e}, J^2+1 {jsq:.2e}, |d omega| {domega:.2e}; hopf_s3s1 {} in {:.2} s: |N| {n:.2e}; all <= 1e-8, < 30 s",
            kt.status.code(),
            kt_time.as_secs_f64(),
            hopf.status.code(),
            hopf_time.as_secs_f64()
        ),
    };
    (line, Runs { kt, hopf, flat })
}

fn convergence_order() -> Line {
    const DT: f64 = 0.0125;
    let s = builtin("kodaira_thurston").unwrap();
    let end_state = |dt: f64| {
        let cfg = IntegratorConfig {
            dt,
            t_end: 0.5,
            sample_stride: usize::MAX,
            ..IntegratorConfig::default()
        };
        let traj = integrate(&s, &cfg).unwrap();
        assert_eq!(traj.status, Termination::Completed, "dt = {dt}");
        let last = traj.last();
        assert_eq!(last.t, 0.5);
        (last.g.clone(), last.j.clone())
    };
    let reference = end_state(DT / 8.0);
    let err = |x: &(Vec<f64>, Vec<f64>)| {
        x.0.iter()
            .zip(&reference.0)
            .chain(x.1.iter().zip(&reference.1))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let e1 = err(&end_state(DT));
    let e2 = err(&end_state(DT / 2.0));
    let ratio = e1 / e2;
    Line {
        id: 6,
        title: "convergence order",
        pass: (12.0..=20.0).contains(&ratio),
        detail: format!("dt {DT}: error {e1:.3e}, dt/2: error {e2:.3e}, ratio {ratio:.2} in [12, 20]"),
    }
}

fn random_metric(rng: &mut ChaCha8Rng, n: usize) -> Metric {
    loop {
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        if let Ok(m) = Metric::new(&a * a.transpose() + DMatrix::identity(n, n) * 0.1) {
            return m;
        }
    }
}

fn oracle_equivalence() -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut contractions = 0;
    for case in 0..100 {
        let n: usize = [2, 4, 6][case % 3];
        let order = 1 + case % 4;
        let variance: Vec<Variance> = (0..order)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    Variance::Upper
                } else {
                    Variance::Lower
                }
            })
            .collect();
        let len = n.pow(order as u32);
        let data: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t = Tensor::from_data(n, variance, data).unwrap();
        let m = random_metric(&mut rng, n);
        let (fast, slow) = (frame_norm(&t, &m), oracle_norm(&t, &m));
        worst = worst.max((fast - slow).abs() / slow.max(f64::MIN_POSITIVE));
        for a in 0..order {
            for b in a + 1..order {
                let fast = contract(&t, a, b, &m).unwrap();
                let slow = oracle_contract(&t, a, b, &m).unwrap();
                let scale = slow.max_abs().max(f64::MIN_POSITIVE);
                worst = worst.max(fast.max_abs_diff(&slow) / scale);
                contractions += 1;
            }
        }
    }
    Line {
        id: 7,
        title: "oracle equivalence",
        pass: worst <= 1e-13,
        detail: format!("100 tensors, {contractions} contractions, worst relative difference {worst:.2e} <= 1e-13"),
    }
}

fn blowup_detector(runs: &Runs) -> Line {
    let threshold = 1e6;
    let mut samples = runs.kt.samples.clone();
    let k = samples.len() / 2;
    samples[k].rm = 2.0 * threshold;
    let injected = detect_blowup_samples(&samples, threshold);
    let expected_t = samples[k - 1].t;
    let fired_ok = injected.fired && injected.t_last_valid == Some(expected_t) && injected.max_quantity_name == "|Rm|";
    let quiet: Vec<_> = [&runs.flat, &runs.kt, &runs.hopf]
        .iter()
        .map(|t| (t.label.clone(), detect_blowup(t, threshold)))
        .collect();
    let quiet_ok = quiet.iter().all(|(_, v)| !v.fired);
    let detail = format!(
        "injected |Rm| = 2e6 at t = {}: fired {}, t_last_valid {:?} (expected {expected_t}); builtins on [0,1]: {}",
        samples[k].t,
        injected.fired,
        injected.t_last_valid,
        quiet
            .iter()
            .map(|(n, v)| format!("{n} {}", if v.fired { "fired" } else { "quiet" }))
            .collect::<Vec<_>>()
            .join(", ")
    );
    Line {
        id: 8,
        title: "blow-up detector",
        pass: fired_ok && quiet_ok,
        detail,
    }
}

fn main() -> ExitCode {
    let mut lines = vec![identity_suite(), reduction_suite(), gauge_identity(), kahler_ricci()];
    let (line, runs) = structure_preservation();
    lines.push(line);
    lines.push(convergence_order());
    lines.push(oracle_equivalence());
    lines.push(blowup_detector(&runs));

    let mut failed = 0;
    for l in &lines {
        println!(
            "[{}] criterion {} {}: {}",
            if l.pass { "PASS" } else { "FAIL" },
            l.id,
            l.title,
            l.detail
        );
        failed += usize::from(!l.pass);
    }
    println!(
        "acceptance: {} of {} criteria passed",
        lines.len() - failed,
        lines.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
