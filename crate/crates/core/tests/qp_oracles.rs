mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use tiernav::qp::{kkt_residual, solve_qp, QpProblem};

#[test]
fn box_problems_match_clamped_optimum() {
    let mut rng = common::rng(11);
    for _ in 0..200 {
        let c = common::box_qp_case(&mut rng);
        assert!(c.kkt <= 1e-6 && c.distance <= 1e-6, "kkt {} distance {}", c.kkt, c.distance);
    }
}

#[test]
fn equality_problems_match_kkt_solve() {
    let mut rng = common::rng(12);
    for _ in 0..200 {
        let c = common::equality_qp_case(&mut rng);
        assert!(c.kkt <= 1e-6 && c.distance <= 1e-6, "kkt {} distance {}", c.kkt, c.distance);
    }
}

#[test]
fn planar_problems_match_vertex_enumeration() {
    let mut rng = common::rng(13);
    for _ in 0..60 {
        let c = common::planar_qp_case(&mut rng);
        assert!(c.kkt <= 1e-6 && c.distance <= 1e-6, "kkt {} distance {}", c.kkt, c.distance);
    }
}

#[test]
fn contradictory_bounds_are_infeasible() {
    let p = DMatrix::identity(2, 2);
    let q = DVector::zeros(2);
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]);
    let b = DVector::from_vec(vec![-1.0, -1.0]);
    let sol = solve_qp(&QpProblem::inequality_only(p, q, a, b).unwrap(), 1e-10, 100);
    assert!(!sol.is_optimal());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // feasible by construction: every row is satisfied at the origin
    #[test]
    fn solutions_are_feasible_and_stationary(
        n in 1usize..8,
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut rng = common::rng(seed);
        let m = rng.random_range(0..2 * n + 1);
        let l = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let p = &l * l.transpose() + DMatrix::identity(n, n);
        let q = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
        let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(m, |_, _| rng.random_range(0.0..2.0));
        let prob = QpProblem::inequality_only(p, q, a.clone(), b.clone()).unwrap();
        let sol = solve_qp(&prob, 1e-10, 500);
        prop_assert!(sol.is_optimal());
        prop_assert!((&a * &sol.x - &b).max() <= 1e-8);
        prop_assert!(kkt_residual(&prob, &sol.x, &sol.multipliers) <= 1e-6);
    }
}
