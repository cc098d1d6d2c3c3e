//! Solver runs against the independent oracles.

mod common;

use common::*;
use fdm_core::geometry::{Bounds, WeightVector};
use fdm_core::problems::{Problem, QuadraticProblem};
use fdm_core::solvers::{run_cyclic_cd, run_projected_gradient, run_scdm, Method, SolverConfig, Termination};
use proptest::prelude::*;

#[test]
fn option1_on_svm_n4_reaches_oracle() {
    let fx = svm_fixture(4);
    let (_, f_star) = fx.solution();
    let cfg = SolverConfig::new(fx.l_weights(), 200 * 4, 17);
    let t = run_scdm(fx.problem.as_ref(), &cfg, Method::OptionI).unwrap();
    assert!((t.final_f() - f_star).abs() < 1e-6, "{} vs {f_star}", t.final_f());
}

#[test]
fn projected_gradient_on_box_quadratic_reaches_oracle() {
    let fx = coupled_quadratic_fixture();
    let (x_star, f_star) = fx.solution();
    let cfg = SolverConfig::new(WeightVector::ones(2), 1000, 0);
    let t = run_projected_gradient(fx.problem.as_ref(), &cfg).unwrap();
    let x = t.final_x();
    assert!((t.final_f() - f_star).abs() < 1e-8);
    assert!(x.iter().zip(&x_star).all(|(a, b)| (a - b).abs() < 1e-8));
}

#[test]
fn svm_minimizer_matches_fine_grid() {
    let fx = svm_fixture(2);
    let (x_star, _) = fx.solution();
    // Plain grid at resolution 1e-3 over [0, 1]².
    let mut best = (vec![0.0, 0.0], f64::INFINITY);
    for a in 0..=1000 {
        for b in 0..=1000 {
            let x = vec![a as f64 / 1000.0, b as f64 / 1000.0];
            let v = fx.oracle.value(&x);
            if v < best.1 {
                best = (x, v);
            }
        }
    }
    let cfg = SolverConfig::new(fx.l_weights(), 2000, 1);
    let x = run_scdm(fx.problem.as_ref(), &cfg, Method::OptionI).unwrap().final_x();
    for i in 0..2 {
        assert!((x[i] - best.0[i]).abs() <= 1e-3, "{x:?} vs {:?}", best.0);
        assert!((x[i] - x_star[i]).abs() <= 1e-9);
    }
}

#[test]
fn duality_gap_at_optimum_and_weak_duality() {
    let fx = svm_fixture(2);
    let (x_star, f_star) = fx.solution();
    let p = fx.problem.as_ref();
    assert!(p.duality_gap(&x_star).unwrap() <= 1e-6);
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(4);
    for _ in 0..200 {
        let x = fx.random_point(&mut rng);
        assert!(p.duality_gap(&x).unwrap() >= p.value(&x) - f_star - 1e-12);
    }
}

#[test]
fn gap_stop_rule_terminates_early() {
    let fx = svm_fixture(8);
    let mut cfg = SolverConfig::new(fx.l_weights(), 1_000_000, 3);
    cfg.stop.gap = Some(1e-8);
    let t = run_scdm(fx.problem.as_ref(), &cfg, Method::OptionI).unwrap();
    assert_eq!(t.termination, Termination::GapReached);
    assert!(t.records.last().unwrap().gap.unwrap() <= 1e-8);
    assert!(t.iterations() < 1_000_000);
}

#[test]
fn cyclic_and_random_progress_per_update_are_comparable() {
    // Reported rather than asserted tightly: both should close most of the
    // gap after the same number of coordinate updates.
    let fx = svm_fixture(8);
    let (_, f_star) = fx.solution();
    let p = fx.problem.as_ref();
    let updates = 40 * 8;
    let random = run_scdm(p, &SolverConfig::new(fx.l_weights(), updates, 5), Method::OptionI).unwrap();
    let cyclic = run_cyclic_cd(p, &SolverConfig::new(fx.l_weights(), updates / 8, 5)).unwrap();
    let f0 = random.records[0].f - f_star;
    let (r, c) = (random.final_f() - f_star, cyclic.final_f() - f_star);
    eprintln!("after {updates} updates: random {r:.3e}, cyclic {c:.3e} (start {f0:.3e})");
    assert!(r < 1e-3 * f0 && c < 1e-3 * f0);
}

#[test]
fn every_solver_is_deterministic() {
    for fx in all_fixtures() {
        let p = fx.problem.as_ref();
        let cfg = SolverConfig::new(fx.l_weights(), 300, 42);
        for m in [Method::OptionI, Method::OptionII] {
            assert!(run_scdm(p, &cfg, m).unwrap().same_path(&run_scdm(p, &cfg, m).unwrap()), "{}", fx.name);
        }
        assert!(run_cyclic_cd(p, &cfg).unwrap().same_path(&run_cyclic_cd(p, &cfg).unwrap()));
        assert!(run_projected_gradient(p, &cfg).unwrap().same_path(&run_projected_gradient(p, &cfg).unwrap()));
    }
}

fn pd_quadratic() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (2usize..5).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::collection::vec(-1.0..1.0f64, n), n),
            prop::collection::vec(-2.0..2.0f64, n),
        )
            .prop_map(move |(b, c)| {
                let h = (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| b[i].iter().zip(&b[j]).map(|(x, y)| x * y).sum::<f64>() + if i == j { 0.1 } else { 0.0 })
                            .collect()
                    })
                    .collect();
                (h, c)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn all_methods_descend_and_stay_feasible((h, c) in pd_quadratic(), seed in 0u64..1000) {
        let n = c.len();
        let p = QuadraticProblem::new(h, c, Bounds::uniform(n, -0.5, 0.5).unwrap()).unwrap();
        let w = WeightVector::new(p.lipschitz().to_vec()).unwrap();
        let cfg = SolverConfig::new(w, 300, seed);
        let traces = [
            run_scdm(&p, &cfg, Method::OptionI).unwrap(),
            run_scdm(&p, &cfg, Method::OptionII).unwrap(),
            run_cyclic_cd(&p, &cfg).unwrap(),
            run_projected_gradient(&p, &cfg).unwrap(),
        ];
        for t in &traces {
            for pair in t.records.windows(2) {
                prop_assert!(pair[1].f <= pair[0].f + 1e-12 * (1.0 + pair[0].f.abs()));
            }
            t.for_each_iteration(|_, _, next| assert!(p.bounds().contains(next)));
        }
    }
}
