use fracstep::l2core::theta_and_d;
use fracstep::quadrature::{oracle_eval, OracleExpr};
use fracstep::*;
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tcte_pairs_match_oracle(
        n in 10usize..3000,
        alpha in 0.05f64..0.95,
        grading in 1.0f64..8.0,
        jf in 0.0f64..1.0,
        kf in 0.0f64..1.0,
    ) {
        let mesh = build_graded_mesh(n, grading, 1.0).unwrap();
        let k = 2 + ((n - 2) as f64 * kf) as usize;
        let j = 1 + ((k - 2) as f64 * jf) as usize;
        let p = coeff_pair(&mesh, j, k, alpha, &Thresholds::default(), CoeffMode::Tcte).unwrap();
        let (theta, d) = theta_and_d(&mesh, j, k);
        let (tau_j, tau_next) = (mesh.tau(j), mesh.tau(j + 1));
        let oa = oracle_eval(&OracleExpr::StdA { tau_j, tau_next, theta, d, alpha }).unwrap();
        let oc = oracle_eval(&OracleExpr::StdCTilde { tau_next, theta, d, alpha }).unwrap();
        prop_assert!(rel(p.a, oa) < 1e-10, "a: {} vs {}", p.a, oa);
        prop_assert!(rel(p.c_tilde, oc) < 1e-10, "c: {} vs {}", p.c_tilde, oc);
    }

    #[test]
    fn last_pair_matches_oracle(n in 2usize..5000, alpha in 0.05f64..0.95, grading in 1.0f64..8.0, kf in 0.0f64..1.0) {
        let mesh = build_graded_mesh(n, grading, 3.0).unwrap();
        let k = 2 + ((n - 2) as f64 * kf) as usize;
        let l = coeff_last(&mesh, k, alpha).unwrap();
        let (tau_prev, tau_k) = (mesh.tau(k - 1), mesh.tau(k));
        let oa = oracle_eval(&OracleExpr::LastA { tau_prev, tau_k, alpha }).unwrap();
        let oc = oracle_eval(&OracleExpr::LastC { tau_prev, tau_k, alpha }).unwrap();
        prop_assert!(rel(l.a_last, oa) < 1e-13);
        prop_assert!(rel(l.c_last, oc) < 1e-13);
    }
}

#[test]
fn direct_mode_loses_digits_where_tcte_does_not() {
    // Far from the diagonal on a strongly graded mesh theta is tiny.
    let alpha = 0.4;
    let mesh = build_graded_mesh(3200, 2.0 / alpha, 1.0).unwrap();
    let (j, k) = (2, 3200);
    let (theta, d) = theta_and_d(&mesh, j, k);
    assert!(theta < 1e-12);
    let (tau_j, tau_next) = (mesh.tau(j), mesh.tau(j + 1));
    let oracle = oracle_eval(&OracleExpr::StdA { tau_j, tau_next, theta, d, alpha }).unwrap();
    let thr = Thresholds::default();
    let tcte = coeff_pair(&mesh, j, k, alpha, &thr, CoeffMode::Tcte).unwrap();
    let direct = coeff_pair(&mesh, j, k, alpha, &thr, CoeffMode::Direct).unwrap();
    assert!(rel(tcte.a, oracle) < 1e-13);
    assert!(rel(direct.a, oracle) > 1e-2);
}

#[test]
fn fast_pairs_follow_the_standard_ones() {
    // With the exponential sum in place of the kernel, the weighted fast
    // coefficients reproduce the standard pair of the last history panel.
    let alpha = 0.5;
    let mesh = build_graded_mesh(300, 4.0, 1.0).unwrap();
    let soe = build_soe(alpha, 1e-13, mesh.tau(2), 1.0).unwrap();
    let thr = Thresholds::default();
    for k in [2, 50, 300] {
        let std = coeff_pair(&mesh, k - 1, k, alpha, &thr, CoeffMode::Tcte).unwrap();
        let (mut a, mut c) = (0.0, 0.0);
        for (&node, &w) in soe.nodes().iter().zip(soe.weights()) {
            let p = fast_coeff_pair(&mesh, k, node, &thr, CoeffMode::Tcte).unwrap();
            a += w * p.a;
            c += w * p.c_tilde;
        }
        assert!(rel(a, std.a) < 1e-11, "k={k}: {a} vs {}", std.a);
        assert!(rel(c, std.c_tilde) < 1e-11, "k={k}: {c} vs {}", std.c_tilde);
    }
}

#[test]
fn mesh_csv_round_trip() {
    let mesh = build_graded_mesh(17, 2.5, 4.0).unwrap();
    let back = TimeMesh::from_csv(std::io::Cursor::new(mesh.to_csv())).unwrap();
    assert_eq!(back.nodes(), mesh.nodes());
}
