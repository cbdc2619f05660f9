use covert_relay::convex::{check_kkt, solve, Affine, Atom, ConvexProgram, Multipliers, SolveStatus};
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn lp() -> ConvexProgram {
    let mut p = ConvexProgram::new();
    let x = p.add_var("x", f64::NEG_INFINITY, f64::INFINITY);
    p.maximize_affine(Affine::var(x));
    p.affine_le_zero("x<=1", Affine::var(x).plus_const(-1.0));
    p.affine_le_zero("x>=0", Affine::term(x, -1.0));
    p
}

fn projection(c: &[f64], lb: f64, ub: f64) -> ConvexProgram {
    let mut p = ConvexProgram::new();
    let args: Vec<Affine> = c
        .iter()
        .enumerate()
        .map(|(i, &ci)| Affine::var(p.add_var(format!("x{i}"), lb, ub)).plus_const(-ci))
        .collect();
    p.subtract_convex(Atom::SqNorm { weight: 1.0, args });
    p
}

#[test]
fn linear_program_hits_upper_bound() {
    let p = lp();
    let r = solve(&p, TOL, 500);
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.x[0] - 1.0).abs() < 1e-8, "{}", r.x[0]);
    let k = check_kkt(&p, &r.x, &r.multipliers);
    assert!(k.stationarity <= 1e-10 && k.feasibility <= 1e-10 && k.complementarity <= 1e-9, "{k:?}");
}

#[test]
fn log_objective_hits_upper_bound() {
    let mut p = ConvexProgram::new();
    let x = p.add_var("x", f64::NEG_INFINITY, f64::INFINITY);
    p.maximize_log(1.0, Affine::var(x));
    p.affine_le_zero("x<=2", Affine::var(x).plus_const(-2.0));
    let r = solve(&p, TOL, 500);
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.x[0] - 2.0).abs() < 1e-8);
    assert!((r.objective - 2f64.ln()).abs() < 1e-8);
}

#[test]
fn projection_onto_box_clips() {
    let c = [-0.5, 0.3, 1.7, 0.99];
    let p = projection(&c, 0.0, 1.0);
    let r = solve(&p, TOL, 500);
    assert_eq!(r.status, SolveStatus::Optimal, "{r:?}");
    let expected = [0.0, 0.3, 1.0, 0.99];
    for (a, b) in r.x.iter().zip(expected) {
        assert!((a - b).abs() < 1e-7, "{a} vs {b}");
    }
}

#[test]
fn perturbed_point_has_large_stationarity_residual() {
    let c = [0.2, 0.4];
    let p = projection(&c, 0.0, 1.0);
    let r = solve(&p, TOL, 500);
    let moved: Vec<f64> = r.x.iter().map(|v| v + 1e-3).collect();
    let k = check_kkt(&p, &moved, &r.multipliers);
    assert!(k.stationarity > 1e-4, "{k:?}");
}

#[test]
fn zero_multipliers_give_objective_gradient() {
    let c = [0.2, 0.4];
    let p = projection(&c, 0.0, 1.0);
    let x = [0.7, 0.1];
    let k = check_kkt(&p, &x, &Multipliers::zeros(&p));
    // gradient of |x - c|^2 is 2 (x - c)
    let expected = (2.0f64 * (0.7 - 0.2)).max((2.0f64 * (0.1 - 0.4)).abs());
    assert!((k.stationarity - expected).abs() < 1e-14);
}

#[test]
fn detects_infeasibility() {
    let mut p = ConvexProgram::new();
    let x = p.add_var("x", 0.0, 10.0);
    p.maximize_affine(Affine::var(x));
    p.affine_le_zero("x<=1", Affine::var(x).plus_const(-1.0));
    p.affine_le_zero("x>=2", Affine::term(x, -1.0).plus_const(2.0));
    let r = solve(&p, TOL, 500);
    assert_eq!(r.status, SolveStatus::Infeasible);
    let cert = r.certificate.expect("certificate");
    assert!(cert.iter().all(|&w| w >= 0.0));
    assert!((cert.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    // the weighted constraint sum is positive everywhere on the box
    for k in 0..=100 {
        let xv = [k as f64 / 10.0];
        let s: f64 = p.constraints.iter().zip(&cert).map(|(c, w)| w * c.eval(&xv)).sum();
        assert!(s > 0.0);
    }
}

#[test]
fn phase_one_recovers_from_infeasible_hint() {
    let mut p = ConvexProgram::new();
    let x = p.add_var("x", 0.0, 10.0);
    let y = p.add_var("y", 0.0, 10.0);
    p.set_hint(x, 9.0);
    p.set_hint(y, 9.0);
    p.maximize_affine(Affine::var(x).plus_term(y, 2.0));
    // disc of radius 1 around (2, 3)
    p.sq_norm_le(
        "disc",
        vec![Affine::var(x).plus_const(-2.0), Affine::var(y).plus_const(-3.0)],
        Affine::constant(1.0),
    );
    let r = solve(&p, TOL, 500);
    assert_eq!(r.status, SolveStatus::Optimal);
    let n = 5f64.sqrt();
    assert!((r.x[0] - (2.0 + 1.0 / n)).abs() < 1e-6);
    assert!((r.x[1] - (3.0 + 2.0 / n)).abs() < 1e-6);
}

#[test]
fn every_atom_kind_solves_with_consistent_residuals() {
    // maximize ln(x) + ln(y) - x^3-ish terms with a second-order cone and a
    // reciprocal penalty
    let mut p = ConvexProgram::new();
    let x = p.add_var("x", 0.0, 5.0);
    let y = p.add_var("y", 0.0, 5.0);
    let r = p.add_var("r", 0.0, 10.0);
    p.maximize_log(1.0, Affine::var(x));
    p.maximize_log(2.0, Affine::var(y));
    p.subtract_convex(Atom::NormCubed { weight: 0.01, args: vec![Affine::var(x), Affine::var(y)] });
    p.subtract_convex(Atom::Recip { weight: 0.1, arg: Affine::var(r) });
    p.subtract_convex(Atom::Affine(Affine::term(r, 0.05)));
    p.norm_le("cone", vec![Affine::var(x), Affine::var(y)], Affine::var(r));
    p.log_ge("log", vec![(1.0, Affine::var(x).plus_const(1.0))], Affine::constant(0.1));
    p.affine_le_zero("sum", Affine::var(x).plus_term(y, 1.0).plus_const(-4.0));
    let rep = solve(&p, TOL, 500);
    assert_eq!(rep.status, SolveStatus::Optimal, "{rep:?}");
    assert!(rep.max_residual() <= TOL);
    let k = check_kkt(&p, &rep.x, &rep.multipliers);
    let floor = 1e-12;
    assert!(k.stationarity <= 10.0 * rep.kkt_stationarity_residual + floor, "{k:?} {rep:?}");
    assert!(k.complementarity <= 10.0 * rep.kkt_complementarity_residual + floor);
    assert!(k.feasibility <= 10.0 * rep.kkt_feasibility_residual + floor);
}

#[test]
fn fixed_variables_stay_put() {
    let mut p = ConvexProgram::new();
    let x = p.add_var("x", 0.0, 1.0);
    let z = p.add_var("z", 0.25, 0.25);
    p.maximize_affine(Affine::var(x));
    p.affine_le_zero("x<=z", Affine::var(x).plus_term(z, -1.0));
    let r = solve(&p, TOL, 500);
    assert_eq!(r.status, SolveStatus::Optimal);
    assert_eq!(r.x[1], 0.25);
    assert!((r.x[0] - 0.25).abs() < 1e-8);
}

#[test]
fn solves_are_deterministic() {
    let p = projection(&[0.3, -0.2, 0.8], -0.1, 0.5);
    assert_eq!(solve(&p, TOL, 500), solve(&p, TOL, 500));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn objective_scaling_keeps_argmax(
        c in prop::collection::vec(-1.0f64..2.0, 3),
        scale in 0.01f64..100.0,
    ) {
        let p = projection(&c, 0.0, 1.0);
        let mut q = p.clone();
        for a in &mut q.objective {
            if let Atom::SqNorm { weight, .. } = a {
                *weight *= scale;
            }
        }
        let r1 = solve(&p, TOL, 500);
        let r2 = solve(&q, TOL, 500);
        prop_assert_eq!(r1.status, SolveStatus::Optimal);
        prop_assert_eq!(r2.status, SolveStatus::Optimal);
        for (a, b) in r1.x.iter().zip(&r2.x) {
            prop_assert!((a - b).abs() < 1e-6);
        }
        prop_assert!((r2.objective - scale * r1.objective).abs() <= 1e-6 * (1.0 + r2.objective.abs()));
    }
}
