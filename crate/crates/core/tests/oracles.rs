//! The fixtures agree with their hand-written objectives, and the oracles
//! agree with each other and with the reference solver.

mod common;

use common::*;
use fdm_core::solvers::{reference_solve, ReferenceOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn problem_values_match_handwritten_objectives() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for fx in all_fixtures() {
        for _ in 0..50 {
            let x = fx.random_point(&mut rng);
            let (a, b) = (fx.problem.value(&x), fx.oracle.value(&x));
            assert!((a - b).abs() <= 1e-11 * (1.0 + b.abs()), "{}: {a} vs {b}", fx.name);
        }
    }
}

#[test]
fn active_set_oracle_agrees_with_grid_search() {
    for fx in all_fixtures().into_iter().filter(|f| f.dim() <= 3 && f.is_quadratic()) {
        let (_, exact) = fx.oracle.quad().unwrap().kkt_minimize();
        let (_, grid) = grid_minimize(|x| fx.oracle.value(x), &fx.search_box.0, &fx.search_box.1);
        assert!((exact - grid).abs() < 1e-9, "{}: {exact} vs {grid}", fx.name);
    }
}

#[test]
fn known_optima() {
    // ½x² weights 1,2,3 minus 1ᵀx on [0,1]³: x_i = 1/i, f = −½ Σ 1/i.
    let (x, f) = diagonal_quadratic_fixture().solution();
    assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12 && (x[2] - 1.0 / 3.0).abs() < 1e-12);
    assert!((f + 0.5 * (1.0 + 0.5 + 1.0 / 3.0)).abs() < 1e-12);
    let (_, f) = singular_quadratic_fixture().solution();
    assert!((f + 0.5).abs() < 1e-12);
    // Coupled: x₂ = 0 is active, x₁ = ½.
    let (x, f) = coupled_quadratic_fixture().solution();
    assert!((x[0] - 0.5).abs() < 1e-12 && x[1].abs() < 1e-12);
    assert!((f + 0.25).abs() < 1e-12);
}

#[test]
fn reference_solver_reaches_oracle_optimum() {
    for fx in all_fixtures() {
        let r = reference_solve(fx.problem.as_ref(), &ReferenceOptions::default()).unwrap();
        if fx.dim() > 3 && !fx.is_quadratic() {
            assert!(r.pg_norm < 1e-10, "{}", fx.name);
            continue;
        }
        let (_, f_star) = fx.solution();
        assert!((r.f - f_star).abs() < 1e-9 * (1.0 + f_star.abs()), "{}: {} vs {f_star}", fx.name, r.f);
    }
}

#[test]
fn svm_reference_solution_closes_the_gap() {
    for n in [2, 4, 8] {
        let fx = svm_fixture(n);
        let r = reference_solve(fx.problem.as_ref(), &ReferenceOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.gap.unwrap() <= 1e-10, "n = {n}: gap {:?}", r.gap);
        let (x, _) = fx.solution();
        let err = x.iter().zip(&r.x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-7, "n = {n}: {err}");
    }
}
