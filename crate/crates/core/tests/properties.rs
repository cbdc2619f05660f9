use covert_relay::covert::{self, DetectorEnv};
use covert_relay::energy;
use covert_relay::pdsa;
use covert_relay::rate;
use covert_relay::scenario::{load_scenario, phase_plan, validate_solution, PhasePlan};
use covert_relay::{Scenario, Solution, Trajectory, Vec2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scenario() -> impl Strategy<Value = Scenario> {
    (
        (1usize..30, 1usize..30),
        (20.0f64..200.0, 50.0f64..150.0),
        (0.0f64..20.0, 0.0f64..20.0),
        (0.001f64..0.2, 0.1f64..3.0),
        (-150.0f64..-90.0, 2.0f64..3.5),
    )
        .prop_map(|((n1, n2), (period, altitude), (rw, re), (eps, pj), (noise_db, eta))| Scenario {
            n1,
            n2,
            period,
            altitude,
            r_warden: rw,
            r_eaves: re,
            epsilon_covert: eps,
            p_jam_max: pj,
            noise: 10f64.powf(noise_db / 10.0),
            eta,
            ..Scenario::reference()
        })
}

fn detector() -> impl Strategy<Value = DetectorEnv> {
    (0.0f64..1.0, 1e-9f64..1e-6, 1e-9f64..1e-6, 0.1f64..2.0, 1e-13f64..1e-11).prop_map(|(p, gsw, grw, pj, n)| {
        DetectorEnv { p_src: p, g_sw_mean: gsw, g_rw: grw, p_jam_max: pj, noise: n }
    })
}

fn solution(scn: &Scenario, seed: u64) -> Solution {
    covert_relay::experiment::random_expansion(scn, &mut ChaCha8Rng::seed_from_u64(seed), 20.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn scenario_round_trips(scn in scenario()) {
        let back = load_scenario(&scn.to_toml_string()).unwrap();
        prop_assert_eq!(back, scn);
    }

    #[test]
    fn phase_durations_fill_the_period(scn in scenario(), alpha in 0.001f64..0.999) {
        let p = phase_plan(&scn, alpha).unwrap();
        let total = p.delta1 * scn.n1 as f64 + p.delta2 * scn.n2 as f64;
        prop_assert!((total - scn.period).abs() <= 1e-9 * scn.period);
    }

    #[test]
    fn shrinking_powers_and_legs_never_hurts_slacks(seed in 0u64..1000, shrink in 0.0f64..1.0) {
        let scn = Scenario { n1: 5, n2: 5, ..Scenario::reference() };
        let sol = solution(&scn, seed);
        let base = validate_solution(&scn, &sol);

        let mut less_power = sol.clone();
        less_power.powers.p_src.iter_mut().for_each(|p| *p *= shrink);
        less_power.powers.p_relay.iter_mut().for_each(|p| *p *= shrink);
        let r = validate_solution(&scn, &less_power);
        // The box slacks also measure distance to zero, so only the covert
        // cap slack is monotone here.
        prop_assert!(r.get("covert_cap").unwrap().worst_slack >= base.get("covert_cap").unwrap().worst_slack - 1e-15);

        // Pull one interior waypoint toward its predecessor: that leg shrinks.
        let k = 1 + (seed as usize % (scn.n_total() - 1));
        let mut shorter = sol.clone();
        let (a, b) = (shorter.trajectory.waypoints[k - 1], shorter.trajectory.waypoints[k]);
        shorter.trajectory.waypoints[k] = a + (b - a) * shrink;
        let d_old = sol.trajectory.legs()[k - 1];
        let d_new = shorter.trajectory.legs()[k - 1];
        prop_assert!(d_new <= d_old + 1e-12);
        let plan = PhasePlan::new(&scn, sol.alpha).unwrap();
        let limit = if k <= scn.n1 { plan.delta1 } else { plan.delta2 } * scn.v_max;
        prop_assert!(limit - d_new >= limit - d_old - 1e-12);
    }

    #[test]
    fn dep_is_a_bounded_sum_of_probabilities(env in detector(), frac in 0.0f64..2.0) {
        let z = env.breakpoints();
        let tau = frac * z.z3;
        let fa = covert::false_alarm_prob(tau, &env);
        let md = covert::miss_detect_prob(tau, &env);
        prop_assert!((0.0..=1.0).contains(&fa));
        prop_assert!((0.0..=1.0).contains(&md));
        prop_assert!(covert::dep(tau, &env) <= 2.0);
    }

    #[test]
    fn dep_shape_between_breakpoints(env in detector(), u in 0.0f64..1.0, v in 0.0f64..1.0) {
        prop_assume!(env.p_src * env.g_sw_mean < env.p_jam_max * env.g_rw);
        let z = env.breakpoints();
        let (lo, hi) = if u < v { (u, v) } else { (v, u) };
        let at = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let tol = 1e-12;
        // non-increasing up to z2
        prop_assert!(covert::dep(at(env.noise, z.z2, hi), &env) <= covert::dep(at(env.noise, z.z2, lo), &env) + tol);
        // flat on [z2, z1)
        let flat = covert::dep(z.z2, &env);
        prop_assert!((covert::dep(at(z.z2, z.z1, lo * 0.999), &env) - flat).abs() <= tol);
        // non-decreasing on [z1, z3]
        prop_assert!(covert::dep(at(z.z1, z.z3, hi), &env) >= covert::dep(at(z.z1, z.z3, lo), &env) - tol);
    }

    #[test]
    fn covert_feasibility_implies_detector_quality(env in detector(), eps in 0.001f64..0.5) {
        let check = covert::covert_ok(env.p_src, env.g_sw_mean, env.g_rw, env.p_jam_max, eps);
        if check.ok && env.p_src > 0.0 {
            let (m, _) = covert::min_dep(&env).unwrap();
            prop_assert!(m >= 1.0 - eps - 1e-12);
        }
    }

    #[test]
    fn r1_monotone_in_its_arguments(p in 0.01f64..1.0, g in 1e-8f64..1e-5, sic in 1e-13f64..1e-9, n in 1e-13f64..1e-11, f in 1.01f64..3.0) {
        let r = |p, g, sic, n| rate::r1_sec_slot(p, g, 1.0, sic, n, 1.0);
        let base = r(p, g, sic, n);
        prop_assert!(r(p * f, g, sic, n) >= base);
        prop_assert!(r(p, g * f, sic, n) >= base);
        prop_assert!(r(p, g, sic * f, n) <= base);
        prop_assert!(r(p, g, sic, n * f) <= base);
    }

    #[test]
    fn smaller_eavesdropper_gain_never_hurts(p in 0.0f64..1.0, grd in 1e-8f64..1e-5, gre in 1e-8f64..1e-5, f in 0.0f64..1.0) {
        prop_assert!(rate::r2_sec_slot(p, grd, gre * f, 1e-12, 1.0) >= rate::r2_sec_slot(p, grd, gre, 1e-12, 1.0));
    }

    #[test]
    fn acsr_is_one_of_the_phase_sums(seed in 0u64..1000, alpha in 0.05f64..0.95) {
        let scn = Scenario { n1: 4, n2: 7, ..Scenario::reference() };
        let sol = solution(&scn, seed);
        let plan = PhasePlan::new(&scn, alpha).unwrap();
        let b = rate::rate_breakdown(&sol.trajectory, &sol.powers, &scn, &plan).unwrap();
        let (s1, s2) = rate::phase_sums(&b.r1_per_slot, &b.r2_per_slot, &plan, true);
        prop_assert!(b.acsr_lb <= s1 && b.acsr_lb <= s2);
        prop_assert!(b.acsr_lb == s1 || b.acsr_lb == s2);
    }

    #[test]
    fn energy_in_alpha_is_convex(seed in 0u64..1000) {
        let scn = Scenario { n1: 5, n2: 5, ..Scenario::reference() };
        let sol = solution(&scn, seed);
        let c = energy::alpha_energy_coeffs(&sol.trajectory.legs(), &scn).unwrap();
        let h = 1e-3;
        for i in 1..999 {
            let a = i as f64 * h;
            let second = c.energy(a - h) - 2.0 * c.energy(a) + c.energy(a + h);
            prop_assert!(second >= -1e-9 * c.energy(a));
        }
    }

    #[test]
    fn energy_terms_move_with_leg_length(d in 1.0f64..200.0, shrink in 0.1f64..0.99, delta in 0.5f64..5.0) {
        // blade and parasite parts fall and the induced part rises when a leg shrinks
        let r = Scenario::reference().rotor;
        let parts = |d: f64| {
            let v = d / delta;
            let blade = delta * r.p0 * 3.0 * v * v / (r.u_tip * r.u_tip);
            let induced = delta * r.p1 * r.v0 / v;
            let parasite = delta * r.parasite_coeff() * v * v * v;
            (blade, induced, parasite)
        };
        let (b0, i0, p0) = parts(d);
        let (b1, i1, p1) = parts(d * shrink);
        prop_assert!(b1 < b0 && p1 < p0 && i1 > i0);
        let total = energy::leg_energy(d, delta, &r);
        prop_assert!((total - (delta * r.p0 + b0 + i0 + p0)).abs() <= 1e-9 * total);
    }

    #[test]
    fn pdsa_answer_is_feasible_and_certified(seed in 0u64..10_000) {
        let scn = Scenario { n1: 10, n2: 10, ..Scenario::reference() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (c, e, phi) = covert_relay::experiment::random_pdsa_instance(&scn, &mut rng).unwrap();
        let (alpha, d) = pdsa::pdsa_alpha(&c, &e, phi).unwrap();
        prop_assert!(alpha >= c.beta1 && alpha <= 1.0 - c.beta2);
        prop_assert!((d.lambda1 + d.lambda2 - 1.0).abs() <= 1e-12);
        prop_assert!(d.lambda1 >= 0.0 && d.lambda2 >= 0.0 && d.lambda3 >= 0.0 && d.lambda4 >= 0.0);
        prop_assert!(d.complementarity_residual <= 1e-6);
        prop_assert!(d.stationarity_residual <= 1e-6 * (1.0 + c.rho1 + c.rho2));
    }
}

#[test]
fn straight_line_has_equal_legs() {
    let t = Trajectory::straight_line(Vec2::new(0.0, 0.0), Vec2::new(30.0, 40.0), 5);
    for d in t.legs() {
        assert!((d - 10.0).abs() < 1e-12);
    }
}
