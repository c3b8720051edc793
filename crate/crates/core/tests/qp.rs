mod support;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;
use shelfpick::linalg::{Mat, Qr};
use shelfpick::qp::*;
use support::{lp_feasible, random_qp};

#[test]
fn verdicts_match_lp_and_optima_satisfy_kkt() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut optimal, mut infeasible) = (0, 0);
    for k in 0..200 {
        let p = random_qp(&mut rng);
        let sol = solve_qp(&p).unwrap_or_else(|e| panic!("problem {k}: {e}"));
        assert_eq!(sol.status == QpStatus::Infeasible, !lp_feasible(&p), "problem {k}: {p:?}");
        match sol.status {
            QpStatus::Optimal => {
                optimal += 1;
                let r = kkt_residuals(&p, &sol).unwrap();
                assert!(r.max() <= 1e-8, "problem {k}: {r:?}");
            }
            QpStatus::Infeasible => infeasible += 1,
            QpStatus::MaxIterations => panic!("problem {k} hit the iteration cap"),
        }
    }
    assert!(optimal > 50 && infeasible > 20, "{optimal} optimal, {infeasible} infeasible");
}

#[test]
fn no_sampled_feasible_point_beats_the_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (mut checked, mut feasible) = (0, 0);
    while checked < 30 {
        let p = random_qp(&mut rng);
        let sol = solve_qp(&p).unwrap();
        if !sol.is_optimal() {
            continue;
        }
        checked += 1;
        let n = p.dim();
        let basis = if p.eq_matrix.rows() == 0 {
            Mat::identity(n)
        } else {
            Qr::new(&p.eq_matrix.transpose()).null_basis()
        };
        for _ in 0..1000 {
            let scale = 10f64.powf(rng.random_range(-4.0..0.5));
            let z: Vec<f64> = (0..basis.cols()).map(|_| rng.random_range(-scale..scale)).collect();
            let step = basis.mul_vec(&z);
            let x: Vec<f64> = sol.x.iter().zip(&step).map(|(a, b)| a + b).collect();
            if p.violation(&x) > 1e-12 {
                continue;
            }
            feasible += 1;
            assert!(sol.objective <= p.objective(&x) + 1e-9, "{} > {}", sol.objective, p.objective(&x));
        }
    }
    assert!(feasible > 1000, "only {feasible} feasible samples");
}

fn diag_problem() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (2usize..6).prop_flat_map(|n| {
        (
            prop::collection::vec(0.1f64..4.0, n),
            prop::collection::vec(-3.0f64..3.0, n),
            prop::collection::vec(-1.0f64..1.0, n),
        )
    })
}

proptest! {
    /// Separable problems with bounds have a closed-form solution: clamp the
    /// unconstrained minimizer coordinatewise.
    #[test]
    fn box_constrained_diagonal_matches_clamp((h, g, ub) in diag_problem()) {
        let n = h.len();
        let c = Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 });
        let p = QpProblem::new(Mat::diagonal(&h), g.clone()).with_inequalities(c, ub.clone());
        let sol = solve_qp(&p).unwrap();
        prop_assert!(sol.is_optimal());
        for i in 0..n {
            let want = (-g[i] / h[i]).min(ub[i]);
            prop_assert!((sol.x[i] - want).abs() <= 1e-9, "x[{}] = {} vs {}", i, sol.x[i], want);
        }
    }
}
