//! Self-checks for the independent test oracles, plus the dual-route
//! comparisons they enable.

mod common;

use common::{entropic_oracle, lp_oracle, pvalue_oracle, quadrature_normal_cdf, TestRng};
use genofp::transport::{absolute_difference_cost, sinkhorn_plan, SinkhornParams};

#[test]
fn quadrature_cdf_matches_known_values() {
    // round values from standard normal tables
    assert!((quadrature_normal_cdf(0.0) - 0.5).abs() < 1e-13);
    assert!((quadrature_normal_cdf(1.0) - 0.841344746068543).abs() < 1e-12);
    assert!((quadrature_normal_cdf(-1.0) - 0.158655253931457).abs() < 1e-12);
    assert!((quadrature_normal_cdf(1.96) - 0.975002104851780).abs() < 1e-12);
    assert!((quadrature_normal_cdf(-3.0) - 0.001349898031630).abs() < 1e-12);
}

#[test]
fn pvalue_oracle_reproduces_hand_example() {
    let (or, z, p) = pvalue_oracle([30, 15, 5], [20, 20, 10]);
    assert!((or - 2.25).abs() < 1e-12);
    assert!((z - 1.986365246734842).abs() < 1e-12);
    assert!((p - 0.046992782617714).abs() < 1e-9);
}

#[test]
fn lp_oracle_finds_known_minimum() {
    let cost = absolute_difference_cost();
    let solution = lp_oracle(&[0.5, 0.3, 0.2], &[0.3, 0.4, 0.3], &cost);
    assert!((solution.min_cost - 0.3).abs() < 1e-12);
    // this instance has a degenerate optimal face (several optimal vertices)
    assert!(solution.optimal_vertices.len() > 1);

    let unique = lp_oracle(&[0.6, 0.2, 0.2], &[0.2, 0.6, 0.2], &cost);
    // net flow crosses only the 0|1 boundary: cost 0.4, unique monotone plan
    assert!((unique.min_cost - 0.4).abs() < 1e-12);
}

#[test]
fn newton_oracle_agrees_with_sinkhorn() {
    let cost = absolute_difference_cost();
    let mut rng = TestRng::new(0xfeed);
    for _ in 0..20 {
        let source = rng.simplex_point();
        let target = rng.simplex_point();
        for lambda in [5.0, 50.0] {
            let oracle = entropic_oracle(&source, &target, &cost, lambda);
            let plan = sinkhorn_plan(&source, &target, &SinkhornParams::with_lambda(lambda))
                .expect("sinkhorn converges");
            for i in 0..3 {
                for j in 0..3 {
                    assert!(
                        (oracle[i][j] - plan.plan[i][j]).abs() < 1e-6,
                        "lambda {lambda}: cell ({i},{j}) oracle {} vs sinkhorn {}",
                        oracle[i][j],
                        plan.plan[i][j]
                    );
                }
            }
        }
    }
}

#[test]
fn oracle_plan_is_feasible() {
    let cost = absolute_difference_cost();
    let source = [0.5, 0.3, 0.2];
    let target = [0.3, 0.4, 0.3];
    let g = entropic_oracle(&source, &target, &cost, 50.0);
    for i in 0..3 {
        let row: f64 = g[i].iter().sum();
        assert!((row - source[i]).abs() < 1e-10);
    }
    for j in 0..3 {
        let col: f64 = (0..3).map(|i| g[i][j]).sum();
        assert!((col - target[j]).abs() < 1e-10);
    }
}
