//! Library outputs against independent re-derivations written from the model
//! definitions (no shared code paths beyond the scenario types).

use approx::assert_relative_eq;
use covert_relay::ao::{self, AoConfig, Mode};
use covert_relay::channel::{self, GainSet};
use covert_relay::covert::{self, DetectorEnv};
use covert_relay::energy;
use covert_relay::sca;
use covert_relay::scenario::PhasePlan;
use covert_relay::{PowerSchedule, Scenario, Solution, Trajectory, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small() -> Scenario {
    Scenario { n1: 6, n2: 6, ..Scenario::reference() }
}

fn log2_1p(x: f64) -> f64 {
    (1.0 + x).log2()
}

/// Efficiency recomputed slot by slot from positions, powers and speeds.
fn csee_oracle(scn: &Scenario, sol: &Solution) -> (f64, f64, f64) {
    let h2 = scn.altitude * scn.altitude;
    let q = &sol.trajectory.waypoints;
    let n1 = scn.n1;
    let n = n1 + scn.n2;
    let d1 = sol.alpha * scn.period / n1 as f64;
    let d2 = (1.0 - sol.alpha) * scn.period / scn.n2 as f64;
    let mut s1 = 0.0;
    for (qk, p) in q[1..=n1].iter().zip(&sol.powers.p_src) {
        let g_sr = scn.beta0 / ((qk.x - scn.q_src.x).powi(2) + (qk.y - scn.q_src.y).powi(2) + h2);
        s1 += log2_1p(p * g_sr / (scn.p_jam_max * scn.sic_level + scn.noise));
    }
    let mut s2 = 0.0;
    for (qk, &p) in q[n1 + 1..=n].iter().zip(&sol.powers.p_relay) {
        let g_rd = scn.beta0 / ((qk.x - scn.q_dst.x).powi(2) + (qk.y - scn.q_dst.y).powi(2) + h2);
        let de = (((qk.x - scn.q_eaves_est.x).powi(2) + (qk.y - scn.q_eaves_est.y).powi(2)).sqrt() - scn.r_eaves)
            .max(0.0);
        let g_re = scn.beta0 / (de * de + h2);
        s2 += (log2_1p(p * g_rd / scn.noise) - log2_1p(p * g_re / scn.noise)).max(0.0);
    }
    let acsr = (sol.alpha / n1 as f64 * s1).min((1.0 - sol.alpha) / scn.n2 as f64 * s2) * scn.bandwidth;
    let mut e = 0.0;
    for k in 1..=n {
        let delta = if k <= n1 { d1 } else { d2 };
        let v = ((q[k].x - q[k - 1].x).powi(2) + (q[k].y - q[k - 1].y).powi(2)).sqrt() / delta;
        e += delta * energy::propulsion_power_approx(v, &scn.rotor).unwrap();
    }
    (acsr * scn.period / e, acsr, e)
}

#[test]
fn evaluation_matches_slotwise_oracle() {
    let scn = small();
    for mode in [Mode::Prop, Mode::Ben2] {
        let (sol, _) = ao::ao_solve(&scn, &AoConfig::new(&scn, mode)).unwrap();
        let (csee, acsr, e) = csee_oracle(&scn, &sol);
        assert_relative_eq!(sol.acsr_lb, acsr, max_relative = 1e-10);
        assert_relative_eq!(sol.energy, e, max_relative = 1e-10);
        assert_relative_eq!(sol.csee, csee, max_relative = 1e-10);
    }
}

#[test]
fn energy_coefficients_match_direct_sum() {
    let scn = small();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut w = vec![scn.q_start];
    for _ in 0..scn.n_total() - 1 {
        let last = *w.last().unwrap();
        w.push(last + Vec2::new(rng.random_range(20.0..90.0), rng.random_range(-30.0..30.0)));
    }
    w.push(scn.q_end);
    let traj = Trajectory::new(w);
    let coeffs = energy::alpha_energy_coeffs(&traj.legs(), &scn).unwrap();
    for alpha in [0.2, 0.35, 0.5, 0.61, 0.8] {
        let plan = PhasePlan::new(&scn, alpha).unwrap();
        let direct = energy::e_sum(&traj, &plan, &scn).unwrap();
        assert_relative_eq!(coeffs.energy(alpha), direct, max_relative = 1e-12);
        let h = 1e-6;
        let fd = (coeffs.energy(alpha + h) - coeffs.energy(alpha - h)) / (2.0 * h);
        assert_relative_eq!(coeffs.derivative(alpha), fd, max_relative = 1e-5);
    }
}

#[test]
fn exact_power_at_hover_and_cruise() {
    let r = Scenario::reference().rotor;
    // Hover: blade plus induced power.
    assert_relative_eq!(energy::propulsion_power_exact(0.0, &r), r.p0 + r.p1, max_relative = 1e-15);
    let v: f64 = 18.0;
    let blade = r.p0 * (1.0 + 3.0 * v * v / (r.u_tip * r.u_tip));
    let vi = ((1.0 + v.powi(4) / (4.0 * r.v0.powi(4))).sqrt() - v * v / (2.0 * r.v0 * r.v0)).sqrt();
    let parasite = 0.5 * r.d0 * r.rho_air * r.rotor_solidity * r.disc_area * v.powi(3);
    assert_relative_eq!(energy::propulsion_power_exact(v, &r), blade + r.p1 * vi + parasite, max_relative = 1e-13);
}

/// Error probabilities of the threshold test written as probabilities of
/// uniform variables: `T0 = sigma^2 + U J`, `T1 = sigma^2 + S + U J`.
fn dep_oracle(tau: f64, env: &DetectorEnv) -> f64 {
    let j = env.p_jam_max * env.g_rw;
    let s = env.p_src * env.g_sw_mean;
    let p_u_greater = |x: f64| (1.0 - x).clamp(0.0, 1.0);
    let fa = p_u_greater((tau - env.noise) / j);
    let md = 1.0 - p_u_greater((tau - env.noise - s) / j);
    fa + md
}

#[test]
fn dep_matches_uniform_probability_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let env = DetectorEnv {
            p_src: rng.random_range(0.01..1.0),
            g_sw_mean: rng.random_range(1e-9..1e-7),
            g_rw: rng.random_range(1e-8..1e-6),
            p_jam_max: rng.random_range(0.1..2.0),
            noise: 1e-12,
        };
        let top = 1.5 * (env.p_jam_max * env.g_rw + env.p_src * env.g_sw_mean);
        for i in 0..50 {
            let tau = top * i as f64 / 49.0;
            assert!((covert::dep(tau, &env) - dep_oracle(tau, &env)).abs() < 1e-12);
        }
        if env.p_src * env.g_sw_mean < env.p_jam_max * env.g_rw {
            let (m, _) = covert::min_dep(&env).unwrap();
            assert_relative_eq!(m, 1.0 - env.p_src * env.g_sw_mean / (env.p_jam_max * env.g_rw), max_relative = 1e-12);
        }
    }
}

#[test]
fn worst_case_gains_dominate_sampled_positions() {
    let scn = Scenario::reference();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g_sw = channel::worst_case_sw_gain(&scn).unwrap();
    for _ in 0..10_000 {
        let rho = scn.r_warden * rng.random::<f64>().sqrt();
        let th = rng.random_range(0.0..std::f64::consts::TAU);
        let dq = Vec2::new(rho * th.cos(), rho * th.sin());
        let q_uav = Vec2::new(rng.random_range(0.0..700.0), rng.random_range(100.0..600.0));
        let w = scn.q_warden_est + dq;
        let e = scn.q_eaves_est + dq * (scn.r_eaves / scn.r_warden);
        assert!(g_sw >= channel::g2g_mean_gain(scn.q_src, w, scn.beta0, scn.eta).unwrap() - 1e-12);
        assert!(channel::worst_case_rw_gain(q_uav, &scn) <= channel::a2g_gain(q_uav, w, scn.altitude, scn.beta0) + 1e-12);
        assert!(channel::worst_case_re_gain(q_uav, &scn) >= channel::a2g_gain(q_uav, e, scn.altitude, scn.beta0) - 1e-12);
    }
}

#[test]
fn linearizations_bound_their_targets_at_random_expansions() {
    let scn = small();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let exp = covert_relay::experiment::random_expansion(&scn, &mut rng, 40.0);
        let lin = sca::linearize_terms(&exp, &scn).unwrap();
        let g = GainSet::compute(&exp.trajectory, &scn).unwrap();
        let bw = scn.bandwidth / std::f64::consts::LN_2;
        for (i, k) in lin.k.iter().enumerate() {
            for _ in 0..50 {
                let p = rng.random_range(0.0..=scn.p_relay_max);
                let target = bw * (scn.noise + p * g.g_re_wc[i]).ln();
                assert!(k.eval(p) >= target - 1e-9 * target.abs());
            }
        }
        // Concave logs in the slack variables: tangents over-estimate.
        for t in lin.c.iter().chain(&lin.d) {
            for _ in 0..50 {
                let x = t.at * rng.random_range(0.2..5.0);
                let target = t.value + bw * (x / t.at).ln();
                assert!(t.eval(x) >= target - 1e-9 * target.abs());
            }
        }
        for (i, t) in lin.e.iter().enumerate() {
            let p = exp.powers.p_relay[i];
            for _ in 0..50 {
                let x = t.at * rng.random_range(0.2..5.0);
                let target = bw * (x * scn.noise + p * scn.beta0).ln();
                assert!(t.eval(x) >= target - 1e-9 * target.abs());
            }
        }
    }
}

/// One free waypoint: repeated trajectory steps should climb to the best
/// point a dense grid finds for the same fixed powers and phase split.
#[test]
fn trajectory_steps_reach_grid_optimum_for_one_free_waypoint() {
    let scn = Scenario { n1: 1, n2: 1, ..Scenario::reference() };
    let alpha = 0.5;
    let plan = PhasePlan::new(&scn, alpha).unwrap();
    let start = Trajectory::straight_line(scn.q_start, scn.q_end, 2);
    let powers = PowerSchedule { p_src: vec![sca::source_power_caps(&start, &scn).unwrap()[0] * 0.5], p_relay: vec![1.0] };
    let mut sol = Solution {
        trajectory: start,
        powers: powers.clone(),
        alpha,
        csee: 0.0,
        acsr_lb: 0.0,
        energy: 0.0,
        iterations: 0,
        phi_history: vec![],
    };
    let phi = 1e-5;
    let objective = |t: &Trajectory| sca::surrogate_objective(t, &powers, &plan, &scn, phi).unwrap();
    let caps_ok = |t: &Trajectory| sca::source_power_caps(t, &scn).unwrap()[0] >= powers.p_src[0];
    let speed_ok = |t: &Trajectory| t.legs().iter().all(|&d| d <= plan.delta1 * scn.v_max);

    let mut prev = objective(&sol.trajectory);
    for _ in 0..60 {
        let out = sca::solve_trajectory_subproblem(&powers, alpha, &sol, &scn, phi).unwrap();
        let value = objective(&out.trajectory);
        assert!(value >= prev - 1e-8, "{value} < {prev}");
        sol.trajectory = out.trajectory;
        if value - prev < 1e-12 {
            break;
        }
        prev = value;
    }
    let reached = objective(&sol.trajectory);

    let mut best = f64::NEG_INFINITY;
    for i in 0..=700 {
        for j in 0..=600 {
            let q = Vec2::new(i as f64, j as f64);
            let t = Trajectory::new(vec![scn.q_start, q, scn.q_end]);
            if caps_ok(&t) && speed_ok(&t) {
                best = best.max(objective(&t));
            }
        }
    }
    assert!(reached >= best - 1e-3 * best.abs(), "reached {reached}, grid {best}");
}
