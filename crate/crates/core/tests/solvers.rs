mod common;

use cdare_core::analysis::{closed_loop_t1, empirical_order, error_identity_check};
use cdare_core::matcore::CMatrix;
use cdare_core::model::{dual_problem, residuals, transform_to_dare};
use cdare_core::solvers::{plain_sequence, solve, Method, NegativeStatus, Verdict};
use cdare_core::{CdareError, CdareProblem, Sign, SolverConfig};
use common::*;
use num_complex::Complex64;

#[test]
fn all_methods_agree_with_brute_force_oracle() {
    for (seed, sign) in [(1, Sign::Plus), (2, Sign::Minus), (3, Sign::Plus)] {
        let p = problem(5, seed, 0, sign);
        let want = oracle_solution(&p, 4000);
        for r in 1..=5 {
            let rep = solve(&p, &SolverConfig::with_order(r)).unwrap();
            assert!(rep.converged, "r {r}");
            assert_eq!(rep.verdict, Verdict::Converged);
            assert!(rel(&raw(&rep.x_pos), &want) < 1e-9, "seed {seed} r {r}");
            assert!(min_eig(&raw(&rep.x_pos)) > 0.0);
        }
    }
}

#[test]
fn accelerated_never_needs_more_steps_than_fixed_point() {
    for seed in 0..8 {
        let p = problem(6, seed, 0, Sign::Plus);
        let fp = solve(&p, &SolverConfig::with_order(1)).unwrap();
        let mut last = fp.iterations;
        for r in 2..=5 {
            let it = solve(&p, &SolverConfig::with_order(r)).unwrap().iterations;
            assert!(it <= fp.iterations);
            assert!(it <= last + 1, "seed {seed} r {r}");
            last = it;
        }
    }
}

#[test]
fn report_round_trips_through_json() {
    let p = problem(3, 5, 0, Sign::Plus);
    let rep = solve(&p, &SolverConfig::default()).unwrap();
    let text = serde_json::to_string(&rep).unwrap();
    let back: cdare_core::SolveReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back.x_pos, rep.x_pos);
    assert_eq!(back.iterations, rep.iterations);
    assert_eq!(back.trace.method, Method::Accelerated { order: 2 });
}

#[test]
fn negative_solution_satisfies_the_equation() {
    for seed in 0..5 {
        let p = problem(4, seed, 0, Sign::Plus);
        let rep = solve(&p, &SolverConfig::default()).unwrap();
        assert_eq!(rep.negative_status, NegativeStatus::Computed);
        let xn = rep.x_neg.unwrap();
        assert!(min_eig(&(-raw(&xn))) > 0.0);
        let fx = oracle_f(&p, &raw(&xn));
        assert!(rel(&fx, &raw(&xn)) < 1e-8, "seed {seed}");
    }
}

#[test]
fn singular_a_has_no_negative_solution() {
    let a = CMatrix::from_real_row_major(2, 2, &[0.5, 0.0, 0.0, 0.0]).unwrap();
    let p = CdareProblem::new(a, CMatrix::identity(2), CMatrix::identity(2), Sign::Plus).unwrap();
    let rep = solve(&p, &SolverConfig::default()).unwrap();
    assert!(rep.converged);
    assert_eq!(rep.negative_status, NegativeStatus::SingularA);
    assert!(rep.x_neg.is_none());
}

#[test]
fn dual_problem_solution_inverts_g_infinity() {
    let p = problem(3, 9, 0, Sign::Plus);
    let t1 = transform_to_dare(&p).unwrap();
    let g_inf = plain_sequence(&t1, 400).unwrap().pop().unwrap().g;
    let d = dual_problem(&p);
    let yd = solve(&d, &SolverConfig::default()).unwrap().x_pos;
    // the dual's positive solution is G_inf
    assert!(yd.rel_diff(&g_inf, 1.0) < 1e-9);
}

#[test]
fn error_identities_hold_along_the_sequence() {
    let p = problem(3, 4, 0, Sign::Minus);
    let rep = solve(&p, &SolverConfig::default()).unwrap();
    let t1 = transform_to_dare(&p).unwrap();
    let seq = plain_sequence(&t1, 400).unwrap();
    let g_inf = seq.last().unwrap().g.clone();
    for tk in &seq[..5] {
        assert!(error_identity_check(tk, &rep.x_pos, &g_inf).unwrap() < 1e-9);
    }
    let t = closed_loop_t1(&t1, &rep.x_pos).unwrap();
    let t3 = closed_loop_t1(&seq[2], &rep.x_pos).unwrap();
    assert!(t3.rel_diff(&t.pow(3), 1e-12) < 1e-10);
}

#[test]
fn fixed_point_order_estimate_is_linear() {
    let sp = cdare_core::bench::gen_scalar_problem(0.5f64.sqrt(), Sign::Plus).unwrap();
    let rep = solve(&sp.problem, &SolverConfig::with_order(1)).unwrap();
    let est = empirical_order(&rep.trace).unwrap();
    // residuals contract by rho(T_1)^2 per step
    assert!((est.factor() - 0.5).abs() < 0.05, "factor {}", est.factor());
}

#[test]
fn invalid_input_is_rejected() {
    let a = CMatrix::identity(2);
    let g = CMatrix::from_real_row_major(2, 2, &[1.0, 2.0, 0.0, 1.0]).unwrap();
    assert!(matches!(
        CdareProblem::new(a.clone(), g, CMatrix::identity(2), Sign::Plus),
        Err(CdareError::NotHermitian(_))
    ));
    let h = CMatrix::from_real_diagonal(&[1.0, -1.0]);
    assert!(matches!(
        CdareProblem::new(a.clone(), CMatrix::identity(2), h, Sign::Plus),
        Err(CdareError::NotPositiveDefinite(_))
    ));
    assert!(matches!(
        CdareProblem::new(
            CMatrix::identity(3),
            CMatrix::identity(2),
            CMatrix::identity(2),
            Sign::Plus
        ),
        Err(CdareError::DimensionMismatch(_))
    ));
}

#[test]
fn residuals_vanish_at_the_solution() {
    let p = problem(6, 13, 0, Sign::Plus);
    let rep = solve(&p, &SolverConfig::default()).unwrap();
    let r = residuals(&p, &rep.x_pos).unwrap();
    assert!(r.res <= rep.tol * 10.0 * p.h().norm_fro().max(1.0) || r.nres <= rep.tol);
    let bumped = &rep.x_pos + CMatrix::identity(6).scale_complex(Complex64::new(1e-3, 0.0));
    assert!(residuals(&p, &bumped).unwrap().res > r.res);
}
