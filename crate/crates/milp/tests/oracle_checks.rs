//! Cross-checks of the sparse kernel against the dense reference solvers.

use std::time::Duration;

use coldcharge_milp::oracle::{dense_lp, enumerate_milp, random_milp, DenseOutcome};
use coldcharge_milp::{
    relax, solve_lp, solve_milp, LpProblem, LpStatus, MilpOptions, MilpStatus, Relation,
};
use proptest::prelude::*;

fn check_duality(lp: &LpProblem, sol: &coldcharge_milp::LpSolution) {
    let tol = 1e-6;
    // Sign conventions for a minimization with rows a·x (rel) b.
    for (i, row) in lp.constraints.iter().enumerate() {
        let y = sol.duals[i];
        match row.relation {
            Relation::Le => assert!(y <= tol, "row {i} (<=) has dual {y}"),
            Relation::Ge => assert!(y >= -tol, "row {i} (>=) has dual {y}"),
            Relation::Eq => {}
        }
    }
    // Reduced costs recomputed here from the duals, independent of the solver's copy.
    let mut d = lp.objective.clone();
    for (i, row) in lp.constraints.iter().enumerate() {
        for &(j, a) in &row.coeffs {
            d[j] -= sol.duals[i] * a;
        }
    }
    let mut dual_obj: f64 = lp.constraints.iter().zip(&sol.duals).map(|(r, y)| y * r.rhs).sum();
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        if d[j] > tol {
            assert!(lo.is_finite(), "positive reduced cost on var {j} without lower bound");
            dual_obj += d[j] * lo;
        } else if d[j] < -tol {
            assert!(hi.is_finite(), "negative reduced cost on var {j} without upper bound");
            dual_obj += d[j] * hi;
        } else if lo.is_finite() && hi.is_finite() {
            dual_obj += d[j] * sol.x[j];
        }
    }
    assert!(
        (dual_obj - sol.objective).abs() <= 1e-6 * (1.0 + sol.objective.abs()),
        "primal {} vs dual {}",
        sol.objective,
        dual_obj
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn lp_matches_dense_oracle(seed in any::<u64>(), n in 2usize..14, rows in 1usize..10) {
        let p = random_milp(seed, n, 0, rows);
        let sparse = solve_lp(&p.lp).unwrap();
        match dense_lp(&p.lp) {
            DenseOutcome::Optimal { objective, .. } => {
                prop_assert_eq!(sparse.status, LpStatus::Optimal);
                prop_assert!((sparse.objective - objective).abs() <= 1e-7 * (1.0 + objective.abs()),
                    "sparse {} dense {}", sparse.objective, objective);
                prop_assert!(p.lp.max_violation(&sparse.x) <= 1e-7);
                check_duality(&p.lp, &sparse);
            }
            DenseOutcome::Infeasible => prop_assert_eq!(sparse.status, LpStatus::Infeasible),
            DenseOutcome::Unbounded => prop_assert_eq!(sparse.status, LpStatus::Unbounded),
        }
    }

    #[test]
    fn relaxation_bounds_milp(seed in any::<u64>(), bins in 1usize..7) {
        let p = random_milp(seed, bins + 3, bins, 5);
        let lp = solve_lp(&relax(&p)).unwrap();
        let milp = solve_milp(&p, Duration::from_secs(30), 0.0).unwrap();
        if milp.status == MilpStatus::Optimal {
            prop_assert_eq!(lp.status, LpStatus::Optimal);
            prop_assert!(lp.objective <= milp.objective + 1e-7);
        }
    }
}

#[test]
fn six_binary_instance_matches_enumeration() {
    let p = random_milp(6, 9, 6, 6);
    let (best, _) = enumerate_milp(&p).expect("instance is feasible");
    let s = solve_milp(&p, Duration::from_secs(30), 0.0).unwrap();
    assert_eq!(s.status, MilpStatus::Optimal);
    assert!((s.objective - best).abs() <= 1e-6, "bnb {} enum {}", s.objective, best);
    let relaxed = solve_lp(&relax(&p)).unwrap();
    assert!(relaxed.objective <= s.objective + 1e-9);
}

#[test]
fn random_instances_match_enumeration() {
    for seed in 0..60u64 {
        let bins = 1 + (seed as usize % 10);
        let p = random_milp(1000 + seed, (bins + 4).min(20), bins, 3 + seed as usize % 6);
        let s = solve_milp(&p, Duration::from_secs(30), 0.0).unwrap();
        match enumerate_milp(&p) {
            Some((best, _)) => {
                assert_eq!(s.status, MilpStatus::Optimal, "seed {seed}");
                assert!((s.objective - best).abs() <= 1e-6, "seed {seed}: bnb {} enum {best}", s.objective);
                assert!(p.lp.max_violation(&s.x) <= 1e-6);
                assert!(p.max_integrality_violation(&s.x) <= 1e-6);
                assert!(s.nodes <= 1usize << (bins + 1));
                assert!(s.incumbent_trace.windows(2).all(|w| w[1] <= w[0]));
                assert!(s.gap >= 0.0);
            }
            None => assert_eq!(s.status, MilpStatus::Infeasible, "seed {seed}"),
        }
    }
}

#[test]
fn solve_is_deterministic() {
    let p = random_milp(77, 16, 10, 8);
    let a = solve_milp(&p, Duration::from_secs(30), 0.0).unwrap();
    let b = solve_milp(&p, Duration::from_secs(30), 0.0).unwrap();
    assert_eq!(a.x, b.x);
    assert_eq!(a.nodes, b.nodes);
    assert_eq!(a.incumbent_trace, b.incumbent_trace);
}

#[test]
fn initial_solution_is_used_as_incumbent() {
    let p = random_milp(5, 10, 6, 5);
    let first = solve_milp(&p, Duration::from_secs(30), 0.0).unwrap();
    assert_eq!(first.status, MilpStatus::Optimal);
    let opts = MilpOptions {
        gap_tol: 0.0,
        initial_solution: Some(first.x.clone()),
        ..MilpOptions::default()
    };
    let again = coldcharge_milp::solve_milp_with(&p, &opts).unwrap();
    assert!((again.objective - first.objective).abs() <= 1e-9);
    assert_eq!(again.incumbent_trace[0], first.objective);
}
