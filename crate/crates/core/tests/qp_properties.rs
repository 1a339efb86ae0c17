use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wt_empc::qp::{solve_by_enumeration, QpBuilder, QpSettings, QpSolver, QpStatus, QuadraticProgram, WarmStart};
use wt_empc::validation::random_qp;

fn tight() -> QpSolver {
    QpSolver::new(QpSettings { tolerance: 1e-10, max_iter: 50_000, ..QpSettings::default() })
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn problem(seed: u64, n: usize, m: usize) -> QuadraticProgram {
    random_qp(&mut ChaCha8Rng::seed_from_u64(seed), n, m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matches_enumeration(seed in 0u64..1_000_000, n in 1usize..=6, m in 0usize..=6) {
        let qp = problem(seed, n, m);
        let (x, _) = solve_by_enumeration(&qp, 1e-9).expect("generated problems are feasible");
        let sol = tight().solve(&qp, None).unwrap();
        prop_assert_eq!(sol.status, QpStatus::Optimal);
        let scale = x.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        prop_assert!(max_diff(&sol.x, &x) <= 1e-6 * scale, "x {:?} vs {:?}", sol.x, x);
        prop_assert!(sol.kkt.duality_gap.abs() <= 1e-6);
    }

    #[test]
    fn objective_scaling_scales_multipliers(seed in 0u64..1_000_000, c in 0.01f64..100.0) {
        let qp = problem(seed, 5, 5);
        let mut scaled = qp.clone();
        scaled.p.scale(&vec![c; qp.n], &vec![1.0; qp.n]);
        scaled.q.iter_mut().for_each(|v| *v *= c);
        let a = tight().solve(&qp, None).unwrap();
        let b = tight().solve(&scaled, None).unwrap();
        prop_assert!(a.is_optimal() && b.is_optimal());
        prop_assert!(max_diff(&a.x, &b.x) < 1e-6);
        let ya: Vec<f64> = a.y.iter().map(|v| v * c).collect();
        let ys = ya.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        prop_assert!(max_diff(&ya, &b.y) < 1e-5 * ys);
    }

    #[test]
    fn row_scaling_leaves_primal_unchanged(seed in 0u64..1_000_000, d in 0.05f64..20.0) {
        let qp = problem(seed, 4, 6);
        let mut scaled = qp.clone();
        let m = qp.m();
        scaled.a.scale(&vec![d; m], &vec![1.0; qp.n]);
        scaled.l.iter_mut().for_each(|v| *v *= d);
        scaled.u.iter_mut().for_each(|v| *v *= d);
        let a = tight().solve(&qp, None).unwrap();
        let b = tight().solve(&scaled, None).unwrap();
        prop_assert!(a.is_optimal() && b.is_optimal());
        prop_assert!(max_diff(&a.x, &b.x) < 1e-6);
        let yb: Vec<f64> = b.y.iter().map(|v| v * d).collect();
        let ys = a.y.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        prop_assert!(max_diff(&a.y, &yb) < 1e-5 * ys);
    }
}

#[test]
fn warm_start_from_solution_is_no_slower() {
    for seed in 0..20 {
        let qp = problem(seed, 8, 8);
        let cold = tight().solve(&qp, None).unwrap();
        assert!(cold.is_optimal());
        let warm = tight().solve(&qp, Some(WarmStart { x: &cold.x, y: &cold.y })).unwrap();
        assert!(warm.is_optimal());
        assert!(warm.iterations <= cold.iterations, "seed {seed}: warm {} cold {}", warm.iterations, cold.iterations);
        assert!(max_diff(&warm.x, &cold.x) < 1e-6);
    }
}

#[test]
fn contradictory_bounds_are_infeasible() {
    let mut b = QpBuilder::new(2);
    b.add_square(&[(0, 1.0)], 1.0);
    b.add_square(&[(1, 1.0)], 1.0);
    b.add_inequality(&[(0, 1.0), (1, 1.0)], 3.0, f64::INFINITY);
    b.add_bounds(0, 0.0, 1.0);
    b.add_bounds(1, 0.0, 1.0);
    let qp = b.build().unwrap();
    let sol = tight().solve(&qp, None).unwrap();
    assert_eq!(sol.status, QpStatus::PrimalInfeasible);
    assert!(solve_by_enumeration(&qp, 1e-9).is_none());
}

#[test]
fn multiplier_sign_marks_active_side() {
    // min (x - 2)^2 with x <= 1: upper side active, y > 0
    let mut b = QpBuilder::new(1);
    b.add_square(&[(0, 1.0)], 2.0);
    b.add_linear(0, -4.0);
    b.add_bounds(0, -5.0, 1.0);
    let up = tight().solve(&b.build().unwrap(), None).unwrap();
    assert!((up.x[0] - 1.0).abs() < 1e-8);
    assert!(up.y[0] > 0.0);

    let mut b = QpBuilder::new(1);
    b.add_square(&[(0, 1.0)], 2.0);
    b.add_linear(0, 4.0);
    b.add_bounds(0, -1.0, 5.0);
    let lo = tight().solve(&b.build().unwrap(), None).unwrap();
    assert!((lo.x[0] + 1.0).abs() < 1e-8);
    assert!(lo.y[0] < 0.0);
}
