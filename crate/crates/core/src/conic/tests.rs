use super::*;
use crate::linalg::{hermitian_eigen, outer, CVec};
use crate::rng::{self, streams};
use approx::assert_relative_eq;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn random_hermitian(seed: u64, n: usize) -> CMat {
    let mut r = rng::stream(seed, streams::TEST);
    let a = rng::complex_normal_mat(&mut r, n, n, 1.0);
    (&a + a.adjoint()) * c(0.5)
}

fn trace_normalized_min(cm: &CMat) -> ConicProblem {
    let n = cm.nrows();
    let mut p = ConicProblem::new();
    let x = p.add_psd(n, "X");
    p.set_objective(LinExpr::re_trace(x, cm));
    p.add_eq(LinExpr::trace(x, n), 1.0, "trace");
    p
}

#[test]
fn min_trace_with_unit_trace() {
    let mut p = ConicProblem::new();
    let x = p.add_psd(2, "X");
    p.set_objective(LinExpr::trace(x, 2));
    p.add_eq(LinExpr::trace(x, 2), 1.0, "t");
    let s = solve(&p, &SolverOptions::default()).unwrap();
    assert_relative_eq!(s.primal_objective, 1.0, epsilon = 1e-7);
}

#[test]
fn scalar_in_two_by_two_lmi() {
    let mut p = ConicProblem::new();
    let x = p.add_scalar("x");
    let xe = LinExpr::scalar(x, 1.0);
    lmi_2x2(&mut p, Some(xe.clone()), Some(LinExpr::constant(1.0)), Some(LinExpr::new()), Some(xe.clone()), "P");
    p.set_objective(xe);
    let s = solve(&p, &SolverOptions::default()).unwrap();
    assert_relative_eq!(s.scalar(x), 1.0, epsilon = 1e-6);
    assert_relative_eq!(s.primal_objective, 1.0, epsilon = 1e-7);
}

#[test]
fn min_eigenvalue_oracle_and_certificates() {
    for seed in 0..5 {
        let cm = random_hermitian(seed, 4);
        let lmin = *hermitian_eigen(&cm).values.last().unwrap();
        let p = trace_normalized_min(&cm);
        let s = solve(&p, &SolverOptions::default()).unwrap();
        assert!((s.primal_objective - lmin).abs() <= 1e-7 * (1.0 + lmin.abs()));
        assert!(s.gap <= 1e-7 * (1.0 + s.primal_objective.abs()));
        assert!(s.primal_residual <= 1e-8 && s.dual_residual <= 1e-8);
        let x = s.psd(0);
        let ev = hermitian_eigen(x).values;
        assert!(*ev.last().unwrap() >= -1e-9 * ev[0]);
        // complementary slackness on the block
        let phi = s.dual_slack[0].psd();
        let tr_phi = crate::linalg::trace(phi).re;
        let tr_x = crate::linalg::trace(x).re;
        let cs = crate::linalg::trace_product(phi, x).re.abs();
        assert!(cs <= 1e-7 * (1.0 + tr_phi * tr_x / 4.0), "{cs}");
        // dual feasibility in complex form: Phi = C - y I
        let resid = crate::linalg::frobenius(&(phi - (&cm - CMat::identity(4, 4) * c(s.dual[0]))));
        assert!(resid < 1e-6);
    }
}

#[test]
fn solver_is_deterministic() {
    let p = trace_normalized_min(&random_hermitian(11, 3));
    let a = solve(&p, &SolverOptions::default()).unwrap();
    let b = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(a.primal, b.primal);
    assert_eq!(a.dual, b.dual);
    assert_eq!(a.iterations, b.iterations);
}

#[test]
fn objective_scaling_keeps_argmin() {
    let cm = random_hermitian(5, 3);
    let a = solve(&trace_normalized_min(&cm), &SolverOptions::default()).unwrap();
    let b = solve(&trace_normalized_min(&(&cm * c(250.0))), &SolverOptions::default()).unwrap();
    assert!(crate::linalg::frobenius(&(a.psd(0) - b.psd(0))) < 1e-5);
}

#[test]
fn negative_trace_is_infeasible() {
    let mut p = ConicProblem::new();
    let x = p.add_psd(2, "X");
    p.set_objective(LinExpr::trace(x, 2));
    p.add_le(LinExpr::trace(x, 2), -1.0, "neg");
    match solve(&p, &SolverOptions::default()) {
        Err(crate::Error::Infeasible { certificate }) => assert!(certificate > 0.0),
        other => panic!("expected infeasible, got {other:?}"),
    }
    match phase1_start(&p).unwrap() {
        Phase1Outcome::Infeasible { certificate } => assert_relative_eq!(certificate, 1.0 / 3.0, epsilon = 1e-6),
        other => panic!("{other:?}"),
    }
}

#[test]
fn phase1_on_unconstrained_block() {
    let mut p = ConicProblem::new();
    p.add_psd(3, "X");
    match phase1_start(&p).unwrap() {
        Phase1Outcome::Strict { values, margin } => {
            assert!(margin > 0.0);
            let ev = hermitian_eigen(values[0].psd()).values;
            assert!(*ev.last().unwrap() >= margin * (1.0 - 1e-9));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn phase1_start_satisfies_constraints() {
    let mut p = ConicProblem::new();
    let x = p.add_psd(2, "X");
    let s = p.add_scalar("s");
    p.add_eq(LinExpr::trace(x, 2).add_scalar(s, 1.0), 3.0, "sum");
    p.add_ge(LinExpr::entry_re(x, 0, 1), 0.2, "corr");
    match phase1_start(&p).unwrap() {
        Phase1Outcome::Strict { values, margin } => {
            assert!(margin > 0.0);
            for con in &p.constraints {
                let v = con.expr.eval(&values);
                match con.relation {
                    Relation::Eq => assert!((v - con.rhs).abs() < 1e-6),
                    Relation::Ge => assert!(v >= con.rhs - 1e-6),
                    Relation::Le => assert!(v <= con.rhs + 1e-6),
                }
            }
        }
        other => panic!("{other:?}"),
    }
}

fn fixed_trace_inverse(r: &CMat) -> f64 {
    let n = r.nrows();
    let mut p = ConicProblem::new();
    let lift = lift_trace_inverse(&mut p, n, "L");
    link_hermitian(&mut p, lift.r_view(), &[], Some(r), "R");
    p.set_objective(lift.objective());
    solve(&p, &SolverOptions::default().with_gap(1e-10)).unwrap().primal_objective
}

#[test]
fn trace_inverse_lift_values() {
    assert_relative_eq!(fixed_trace_inverse(&CMat::identity(3, 3)), 3.0, epsilon = 1e-7);
    let d = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0), c(2.0)]));
    assert_relative_eq!(fixed_trace_inverse(&d), 1.5, epsilon = 1e-7);
    let mut r = rng::stream(3, streams::TEST);
    let a = rng::complex_normal_mat(&mut r, 3, 3, 1.0);
    let m = &a * a.adjoint() + CMat::identity(3, 3) * c(0.5);
    let want = crate::linalg::trace(&m.clone().try_inverse().unwrap()).re;
    assert!((fixed_trace_inverse(&m) - want).abs() <= 1e-7 * (1.0 + want));
}

#[test]
fn square_and_inverse_lifts() {
    let mut p = ConicProblem::new();
    let y = p.add_scalar("y");
    p.add_eq(LinExpr::scalar(y, 1.0), 3.0, "fix");
    let u = lift_square(&mut p, LinExpr::scalar(y, 1.0), "sq");
    p.set_objective(u.clone());
    let s = solve(&p, &SolverOptions::default()).unwrap();
    assert_relative_eq!(s.value(&u), 9.0, epsilon = 1e-6);

    let mut p = ConicProblem::new();
    let g = p.add_scalar("gamma");
    p.add_eq(LinExpr::scalar(g, 1.0), 2.0, "fix");
    let w = lift_inverse(&mut p, LinExpr::scalar(g, 1.0), 1.0, "inv");
    let v = lift_square(&mut p, w.clone(), "sq");
    p.set_objective(v.clone().plus(w.clone()));
    let s = solve(&p, &SolverOptions::default().with_gap(1e-10)).unwrap();
    assert_relative_eq!(s.value(&w), 0.5, epsilon = 1e-6);
    assert_relative_eq!(s.value(&v), 0.25, epsilon = 1e-6);
}

#[test]
fn text_round_trip() {
    let mut p = trace_normalized_min(&random_hermitian(8, 3));
    let s = p.add_scalar("slack var");
    p.add_le(LinExpr::entry_im(0, 2, 0).add_scalar(s, 0.5), 0.1, "mixed");
    let text = dump(&p);
    let q = load(&text).unwrap();
    assert_eq!(dump(&q), text);
    let a = solve(&p, &SolverOptions::default()).unwrap();
    let b = solve(&q, &SolverOptions::default()).unwrap();
    assert!((a.primal_objective - b.primal_objective).abs() < 1e-9);
    assert!(load("conic 2\n").is_err());
    assert!(load(&text.replace("end\n", "")).is_err());
}

#[test]
fn rank_one_optimum_recovered() {
    // min -|h^H x|^2-type objective over unit trace: optimum is h h^H / |h|^2
    let mut r = rng::stream(21, streams::TEST);
    let h = rng::complex_normal_vec(&mut r, 4, 1.0);
    let cm = -outer(&h);
    let s = solve(&trace_normalized_min(&cm), &SolverOptions::default().with_gap(1e-10)).unwrap();
    let ev = hermitian_eigen(s.psd(0)).values;
    assert!(ev[1] / ev[0] < 1e-6, "{ev:?}");
}

#[test]
fn non_hermitian_coefficient_rejected() {
    let mut p = ConicProblem::new();
    let x = p.add_psd(2, "X");
    let mut m = CMat::zeros(2, 2);
    m[(0, 1)] = c(1.0);
    p.set_objective(LinExpr::new().add_psd(x, Coef::Dense(m)));
    assert!(p.validate().is_err());
}
