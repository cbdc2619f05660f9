//! Convex restrictions of the power and trajectory blocks around the previous
//! iterate, assembled as [`ConvexProgram`]s and solved with the convex kernel.
//!
//! Every nonconvex term is replaced by a first-order bound that is tight at the
//! expansion point and errs on the safe side, so any point feasible for the
//! restricted program is feasible for the original constraints.

use std::f64::consts::LN_2;

use crate::channel::{self, GainSet};
use crate::convex::{self, Affine, Atom, ConvexProgram, SolveReport, SolveStatus, VarId};
use crate::energy;
use crate::error::{Error, Result};
use crate::rate;
use crate::scenario::{PhasePlan, PowerSchedule, Scenario, Solution, Trajectory, Vec2, D_MIN};

/// Newton step budget for one subproblem solve.
const MAX_NEWTON: usize = 3000;
/// Relative distance by which slack hints are moved off their tight values.
const NUDGE: f64 = 1e-7;
const RETRY_NUDGE: f64 = 1e-4;
/// Lower bound on the eavesdropper slack, as a fraction of `H^2`.
const VARPI_FLOOR: f64 = 1.0 - 1e-6;

/// First-order expansion `value + slope * (x - at)` of a scalar function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tangent {
    pub at: f64,
    pub value: f64,
    pub slope: f64,
}

impl Tangent {
    pub fn eval(&self, x: f64) -> f64 {
        self.value + self.slope * (x - self.at)
    }
}

/// First-order expansion of a function of a planar point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneTangent {
    pub at: Vec2,
    pub value: f64,
    pub grad: Vec2,
}

impl PlaneTangent {
    pub fn eval(&self, p: Vec2) -> f64 {
        self.value + self.grad.dot(p - self.at)
    }

    /// The expansion as an affine function of `(x, y)` given as affines.
    fn affine(&self, x: &Affine, y: &Affine) -> Affine {
        x.clone()
            .scaled(self.grad.x)
            .plus(&y.clone().scaled(self.grad.y))
            .plus_const(self.value - self.grad.dot(self.at))
    }
}

/// Slack variables of the trajectory block.
#[derive(Debug, Clone, PartialEq)]
pub struct Slacks {
    /// Leg-length lower bounds, one per slot, m.
    pub lambda: Vec<f64>,
    /// Squared S->R distances, phase 1, m^2.
    pub nu: Vec<f64>,
    /// Squared R->D distances, phase 2, m^2.
    pub kappa: Vec<f64>,
    /// Squared worst-case R->E distances, phase 2, m^2.
    pub varpi: Vec<f64>,
    /// Squared worst-case R->W distances, phase 1, m^2.
    pub vartheta: Vec<f64>,
}

/// Slack values at which every slack constraint holds with equality.
pub fn seed_slacks(traj: &Trajectory, scn: &Scenario) -> Slacks {
    let h2 = scn.altitude * scn.altitude;
    let n1 = scn.n1;
    let n = scn.n_total();
    let p1 = || (1..=n1).map(|k| traj.slot(k));
    let p2 = || (n1 + 1..=n).map(|k| traj.slot(k));
    Slacks {
        lambda: traj.legs().into_iter().map(|d| d.max(D_MIN)).collect(),
        nu: p1().map(|q| (q - scn.q_src).norm_sq() + h2).collect(),
        kappa: p2().map(|q| (q - scn.q_dst).norm_sq() + h2).collect(),
        varpi: p2()
            .map(|q| {
                let g = (q.dist(scn.q_eaves_est) - scn.r_eaves).max(0.0);
                g * g + h2
            })
            .collect(),
        vartheta: p1()
            .map(|q| {
                let g = q.dist(scn.q_warden_est) + scn.r_warden;
                g * g + h2
            })
            .collect(),
    }
}

/// All first-order bounds used by the two subproblems at one expansion point.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearizations {
    /// Over-estimator of `B log2(noise + P_R g_re)` in `P_R`, phase 2.
    pub k: Vec<Tangent>,
    /// Under-estimator of `|q(n) - q(n-1)|^2` in the leg vector, all slots.
    pub b: Vec<PlaneTangent>,
    /// Over-estimator of `B log2(nu (P_J psi + noise))` in `nu`, phase 1.
    pub c: Vec<Tangent>,
    /// Over-estimator of `B log2(kappa noise)` in `kappa`, phase 2.
    pub d: Vec<Tangent>,
    /// Over-estimator of `B log2(varpi noise + P_R beta0)` in `varpi`, phase 2.
    pub e: Vec<Tangent>,
    /// Under-estimator of `max(|q - q_E| - r_E, 0)^2` in `q`, phase 2.
    pub f: Vec<PlaneTangent>,
}

/// Expands every nonconvex term at `expansion`, with the slacks seeded tight
/// at its trajectory.
pub fn linearize_terms(expansion: &Solution, scn: &Scenario) -> Result<Linearizations> {
    let traj = &expansion.trajectory;
    let powers = &expansion.powers;
    let n1 = scn.n1;
    let n = scn.n_total();
    if traj.num_slots() != n || powers.p_src.len() != n1 || powers.p_relay.len() != scn.n2 {
        return Err(Error::Domain("expansion point does not match the scenario sizes".into()));
    }
    let bw = scn.bandwidth / LN_2;
    let s2 = scn.noise;
    let slacks = seed_slacks(traj, scn);

    let mut k = Vec::with_capacity(scn.n2);
    let mut e = Vec::with_capacity(scn.n2);
    let mut f = Vec::with_capacity(scn.n2);
    for (i, &p) in powers.p_relay.iter().enumerate() {
        let q = traj.slot(n1 + 1 + i);
        let g_re = channel::worst_case_re_gain(q, scn);
        let den = s2 + p * g_re;
        k.push(Tangent { at: p, value: bw * den.ln(), slope: bw * g_re / den });

        let w = slacks.varpi[i];
        let den = w * s2 + p * scn.beta0;
        e.push(Tangent { at: w, value: bw * den.ln(), slope: bw * s2 / den });

        let rel = q - scn.q_eaves_est;
        let dist = rel.norm();
        if dist == 0.0 {
            return Err(Error::DegenerateGeometry(format!(
                "relay slot {} sits on the estimated eavesdropper position",
                n1 + 1 + i
            )));
        }
        let gap = (dist - scn.r_eaves).max(0.0);
        f.push(PlaneTangent { at: q, value: gap * gap, grad: rel * (2.0 * gap / dist) });
    }

    let b = traj
        .waypoints
        .windows(2)
        .map(|w| {
            let dq = w[1] - w[0];
            PlaneTangent { at: dq, value: dq.norm_sq(), grad: dq * 2.0 }
        })
        .collect();

    let cj = scn.jam_power_effective() * scn.sic_level + s2;
    let c = slacks.nu.iter().map(|&v| Tangent { at: v, value: bw * (v * cj).ln(), slope: bw / v }).collect();
    let d = slacks.kappa.iter().map(|&v| Tangent { at: v, value: bw * (v * s2).ln(), slope: bw / v }).collect();

    Ok(Linearizations { k, b, c, d, e, f })
}

/// `acsr_unclamped - phi * energy`: the block objective the subproblems ascend.
pub fn surrogate_objective(
    traj: &Trajectory,
    powers: &PowerSchedule,
    plan: &PhasePlan,
    scn: &Scenario,
    phi: f64,
) -> Result<f64> {
    let b = rate::rate_breakdown(traj, powers, scn, plan)?;
    let acsr = rate::acsr_unclamped(&b.r1_per_slot, &b.r2_per_slot, plan);
    Ok(acsr - phi * energy::e_sum(traj, plan, scn)?)
}

/// Lower bound for the rate epigraph variable: its value at the expansion
/// point (where every bound is tight) minus a wide margin. The optimum never
/// lies below it, and it keeps the variable bounded while searching for a
/// feasible start.
fn omega_floor(traj: &Trajectory, powers: &PowerSchedule, plan: &PhasePlan, scn: &Scenario) -> Result<f64> {
    let b = rate::rate_breakdown(traj, powers, scn, plan)?;
    let w = rate::acsr_unclamped(&b.r1_per_slot, &b.r2_per_slot, plan);
    Ok(w - 1.0 - w.abs())
}

/// The assembled program and the kernel's report for one subproblem.
#[derive(Debug, Clone)]
pub struct SolveRecord {
    pub program: ConvexProgram,
    pub report: SolveReport,
    /// 1, or 2 when the first attempt failed and slacks were reseeded.
    pub attempts: usize,
}

#[derive(Debug, Clone)]
pub struct PowerSubproblemSolution {
    pub p_src: Vec<f64>,
    pub p_relay: Vec<f64>,
    /// Slack of the rate epigraph, bits/s.
    pub omega2: f64,
    /// `omega2 - phi * E_sum`.
    pub objective: f64,
    pub record: SolveRecord,
}

/// Per-slot source power cap: the box limit and the robust covert cap.
pub fn source_power_caps(traj: &Trajectory, scn: &Scenario) -> Result<Vec<f64>> {
    let g_sw = channel::worst_case_sw_gain(scn)?;
    Ok((1..=scn.n1)
        .map(|k| {
            let g_rw = channel::worst_case_rw_gain(traj.slot(k), scn);
            scn.p_src_max.min(scn.epsilon_covert * scn.p_jam_max * g_rw / g_sw)
        })
        .collect())
}

struct PowerVars {
    pr: Vec<VarId>,
}

fn build_power_program(
    traj: &Trajectory,
    plan: &PhasePlan,
    prev: &PowerSchedule,
    lin: &Linearizations,
    scn: &Scenario,
    omega_floor: f64,
) -> Result<(ConvexProgram, PowerVars)> {
    let g = GainSet::compute(traj, scn)?;
    let caps = source_power_caps(traj, scn)?;
    let bw = scn.bandwidth / LN_2;
    let cj = scn.jam_power_effective() * scn.sic_level + scn.noise;
    let mut p = ConvexProgram::new();

    let ps: Vec<VarId> = caps
        .iter()
        .enumerate()
        .map(|(i, &cap)| {
            let v = p.add_var(format!("ps{}", i + 1), 0.0, cap);
            p.set_hint(v, prev.p_src[i].min(cap));
            v
        })
        .collect();
    let pr: Vec<VarId> = (0..scn.n2)
        .map(|i| {
            let v = p.add_var(format!("pr{}", scn.n1 + i + 1), 0.0, scn.p_relay_max);
            p.set_hint(v, prev.p_relay[i]);
            v
        })
        .collect();
    let omega = p.add_var("omega2", omega_floor, f64::INFINITY);
    p.maximize_affine(Affine::var(omega));

    let logs1 = ps
        .iter()
        .zip(&g.g_sr)
        .map(|(&v, &gsr)| (plan.phi1 * bw, Affine::term(v, gsr / cj).plus_const(1.0)))
        .collect();
    p.log_ge("phase1-rate", logs1, Affine::var(omega));

    // log2(noise + P g_rd) - K, with log2(noise) taken out of both terms
    let log_noise = bw * scn.noise.ln();
    let mut rhs = Affine::var(omega);
    let mut logs2 = Vec::with_capacity(scn.n2);
    for ((&v, &grd), k) in pr.iter().zip(&g.g_rd).zip(&lin.k) {
        logs2.push((plan.phi2 * bw, Affine::term(v, grd / scn.noise).plus_const(1.0)));
        rhs = rhs.plus_term(v, plan.phi2 * k.slope).plus_const(plan.phi2 * (k.value - k.slope * k.at - log_noise));
    }
    p.log_ge("phase2-rate", logs2, rhs);
    Ok((p, PowerVars { pr }))
}

/// Phase weighted sums of the rates the power program sees: the exact
/// phase-1 rate and the phase-2 rate with `K` in place of the eavesdropper
/// term.
fn power_phase_values(
    g: &GainSet,
    p_src: &[f64],
    p_relay: &[f64],
    lin: &Linearizations,
    plan: &PhasePlan,
    scn: &Scenario,
) -> (f64, f64) {
    let bw = scn.bandwidth / LN_2;
    let pj = scn.jam_power_effective();
    let s1: f64 = p_src
        .iter()
        .zip(&g.g_sr)
        .map(|(&p, &gsr)| rate::r1_sec_slot(p, gsr, pj, scn.sic_level, scn.noise, scn.bandwidth))
        .sum();
    let s2: f64 = p_relay
        .iter()
        .zip(&g.g_rd)
        .zip(&lin.k)
        .map(|((&p, &grd), k)| bw * (scn.noise + p * grd).ln() - k.eval(p))
        .sum();
    (plan.phi1 * s1, plan.phi2 * s2)
}

/// Solves the power block with the trajectory and `alpha` held fixed.
///
/// The source power is returned at its cap. Each relay power is moved to the
/// closed-form optimum of its slot (full power exactly where the destination
/// gain beats the worst-case eavesdropper gain) when that does not lower the
/// slot's restricted rate.
pub fn solve_power_subproblem(
    traj: &Trajectory,
    alpha: f64,
    prev: &Solution,
    scn: &Scenario,
    phi_l: f64,
) -> Result<PowerSubproblemSolution> {
    let plan = PhasePlan::new(scn, alpha)?;
    let expansion = Solution { trajectory: traj.clone(), ..prev.clone() };
    let lin = linearize_terms(&expansion, scn)?;
    let floor = omega_floor(traj, &prev.powers, &plan, scn)?;
    let (prog, vars) = build_power_program(traj, &plan, &prev.powers, &lin, scn, floor)?;
    let report = convex::solve(&prog, scn.solver_tol, MAX_NEWTON);
    if report.status == SolveStatus::Infeasible {
        return Err(Error::Solver(format!("power subproblem infeasible: {:?}", report.certificate)));
    }
    let energy = energy::e_sum(traj, &plan, scn)?;
    let g = GainSet::compute(traj, scn)?;

    // The rate grows with the source power and the cap is the only limit,
    // so the source power always moves to its cap.
    let p_src = source_power_caps(traj, scn)?;
    // Per relay slot, the closed-form optimum maximizes the true term; take
    // it wherever the restricted term does not drop either.
    let bw = scn.bandwidth / LN_2;
    let p_relay: Vec<f64> = vars
        .pr
        .iter()
        .zip(g.g_rd.iter().zip(&g.g_re_wc))
        .zip(&lin.k)
        .map(|((v, (&grd, &gre)), k)| {
            let solved = report.x[v.0];
            let best = if grd > gre { scn.p_relay_max } else { 0.0 };
            let restricted = |p: f64| bw * (scn.noise + p * grd).ln() - k.eval(p);
            if restricted(best) >= restricted(solved) {
                best
            } else {
                solved
            }
        })
        .collect();
    let (s1, s2) = power_phase_values(&g, &p_src, &p_relay, &lin, &plan, scn);
    let omega2 = s1.min(s2);
    Ok(PowerSubproblemSolution {
        p_src,
        p_relay,
        omega2,
        objective: omega2 - phi_l * energy,
        record: SolveRecord { program: prog, report, attempts: 1 },
    })
}

#[derive(Debug, Clone)]
pub struct TrajectorySubproblemSolution {
    pub trajectory: Trajectory,
    /// Slack values returned by the solver; slots whose slack does not enter
    /// the program (zero power there) carry their tight value instead.
    pub slacks: Slacks,
    pub omega3: f64,
    /// `omega3 - phi * E_sum^sec`, with the surrogate energy in `lambda`.
    pub objective: f64,
    pub record: SolveRecord,
}

struct TrajVars {
    qx: Vec<VarId>,
    qy: Vec<VarId>,
    lambda: Vec<VarId>,
    nu: Vec<Option<VarId>>,
    kappa: Vec<Option<VarId>>,
    varpi: Vec<Option<VarId>>,
    vartheta: Vec<Option<VarId>>,
    omega: VarId,
    /// Constant part of the surrogate energy (hovering term).
    energy_const: f64,
}

/// Builds the trajectory program. `nudge` moves slack hints off their tight
/// values so that the starting point is as interior as possible.
#[allow(clippy::too_many_arguments)]
fn build_trajectory_program(
    powers: &PowerSchedule,
    plan: &PhasePlan,
    prev: &Trajectory,
    lin: &Linearizations,
    scn: &Scenario,
    phi: f64,
    nudge: f64,
    omega_floor: f64,
) -> Result<(ConvexProgram, TrajVars)> {
    let n1 = scn.n1;
    let n = scn.n_total();
    let h2 = scn.altitude * scn.altitude;
    let bw = scn.bandwidth / LN_2;
    let cj = scn.jam_power_effective() * scn.sic_level + scn.noise;
    let g_sw = channel::worst_case_sw_gain(scn)?;
    let tight = seed_slacks(prev, scn);
    let rotor = &scn.rotor;
    let phi = phi.max(0.0);
    let mut p = ConvexProgram::new();

    let mut qx = Vec::with_capacity(n.saturating_sub(1));
    let mut qy = Vec::with_capacity(n.saturating_sub(1));
    for k in 1..n {
        let w = prev.waypoints[k];
        let x = p.add_var(format!("qx{k}"), f64::NEG_INFINITY, f64::INFINITY);
        let y = p.add_var(format!("qy{k}"), f64::NEG_INFINITY, f64::INFINITY);
        p.set_hint(x, w.x);
        p.set_hint(y, w.y);
        qx.push(x);
        qy.push(y);
    }
    let pos = |k: usize| -> (Affine, Affine) {
        if k == 0 {
            (Affine::constant(scn.q_start.x), Affine::constant(scn.q_start.y))
        } else if k == n {
            (Affine::constant(scn.q_end.x), Affine::constant(scn.q_end.y))
        } else {
            (Affine::var(qx[k - 1]), Affine::var(qy[k - 1]))
        }
    };
    let leg = |k: usize| -> (Affine, Affine) {
        let (x1, y1) = pos(k);
        let (x0, y0) = pos(k - 1);
        (x1.plus(&x0.scaled(-1.0)), y1.plus(&y0.scaled(-1.0)))
    };

    let omega = p.add_var("omega3", omega_floor, f64::INFINITY);
    p.maximize_affine(Affine::var(omega));

    // legs: lambda^2 <= B(n), speed limit, surrogate energy
    let mut lambda = Vec::with_capacity(n);
    let mut energy_const = 0.0;
    for k in 1..=n {
        let delta = plan.delta_for_slot(n1, k);
        let (dx, dy) = leg(k);
        let l = p.add_var(format!("lambda{k}"), D_MIN, f64::INFINITY);
        p.set_hint(l, (tight.lambda[k - 1] * (1.0 - nudge)).max(D_MIN));
        lambda.push(l);
        p.sq_norm_le(format!("lambda-tangent{k}"), vec![Affine::var(l)], lin.b[k - 1].affine(&dx, &dy));
        let vmax = delta * scn.v_max;
        p.sq_norm_le(format!("speed{k}"), vec![dx.clone(), dy.clone()], Affine::constant(vmax * vmax));

        energy_const += phi * delta * rotor.p0;
        if phi > 0.0 {
            let u2 = rotor.u_tip * rotor.u_tip;
            p.subtract_convex(Atom::SqNorm { weight: phi * 3.0 * rotor.p0 / (u2 * delta), args: vec![dx.clone(), dy.clone()] });
            p.subtract_convex(Atom::Recip { weight: phi * delta * delta * rotor.p1 * rotor.v0, arg: Affine::var(l) });
            p.subtract_convex(Atom::NormCubed { weight: phi * rotor.parasite_coeff() / (delta * delta), args: vec![dx, dy] });
        }
    }

    // phase 1: S->R distance slack, covert slack, linearized rate
    let mut nu = vec![None; n1];
    let mut vartheta = vec![None; n1];
    let mut logs1 = Vec::new();
    let mut rhs1 = Affine::var(omega);
    for i in 0..n1 {
        let ps = powers.p_src[i];
        if ps <= 0.0 {
            continue;
        }
        let (x, y) = pos(i + 1);
        let slot = i + 1;

        let v = p.add_var(format!("nu{slot}"), h2, f64::INFINITY);
        p.set_hint(v, tight.nu[i] * (1.0 + nudge));
        p.sq_norm_le(
            format!("nu{slot}"),
            vec![x.clone().plus_const(-scn.q_src.x), y.clone().plus_const(-scn.q_src.y)],
            Affine::var(v).plus_const(-h2),
        );
        let c = &lin.c[i];
        let a = ps * scn.beta0 / cj;
        logs1.push((plan.phi1 * bw, Affine::term(v, 1.0 / c.at).plus_const(a / c.at)));
        rhs1 = rhs1.plus_term(v, plan.phi1 * c.slope).plus_const(-plan.phi1 * c.slope * c.at);
        nu[i] = Some(v);

        let cap = scn.epsilon_covert * scn.beta0 * scn.p_jam_max / (ps * g_sw);
        let hint_t = (tight.vartheta[i] * (1.0 + nudge)).min(cap);
        let th = p.add_var(format!("vartheta{slot}"), h2, cap.max(h2));
        p.set_hint(th, hint_t);
        let dw = prev.slot(slot).dist(scn.q_warden_est);
        let t = p.add_var(format!("dw{slot}"), 0.0, f64::INFINITY);
        p.set_hint(t, dw * (1.0 + nudge) + nudge);
        p.norm_le(
            format!("dw{slot}"),
            vec![x.plus_const(-scn.q_warden_est.x), y.plus_const(-scn.q_warden_est.y)],
            Affine::var(t),
        );
        p.sq_norm_le(
            format!("vartheta{slot}"),
            vec![Affine::var(t).plus_const(scn.r_warden)],
            Affine::var(th).plus_const(-h2),
        );
        vartheta[i] = Some(th);
    }
    p.log_ge("phase1-rate", logs1, rhs1);

    // phase 2: R->D and R->E slacks, linearized secrecy rate
    let n2 = scn.n2;
    let mut kappa = vec![None; n2];
    let mut varpi = vec![None; n2];
    let mut logs2 = Vec::new();
    let mut rhs2 = Affine::var(omega);
    for i in 0..n2 {
        let pr = powers.p_relay[i];
        if pr <= 0.0 {
            continue;
        }
        let slot = n1 + 1 + i;
        let (x, y) = pos(slot);
        let a = pr * scn.beta0 / scn.noise;

        let kv = p.add_var(format!("kappa{slot}"), h2, f64::INFINITY);
        p.set_hint(kv, tight.kappa[i] * (1.0 + nudge));
        p.sq_norm_le(
            format!("kappa{slot}"),
            vec![x.clone().plus_const(-scn.q_dst.x), y.clone().plus_const(-scn.q_dst.y)],
            Affine::var(kv).plus_const(-h2),
        );
        let d = &lin.d[i];
        logs2.push((plan.phi2 * bw, Affine::term(kv, 1.0 / d.at).plus_const(a / d.at)));
        rhs2 = rhs2.plus_term(kv, plan.phi2 * d.slope).plus_const(-plan.phi2 * d.slope * d.at);

        let wv = p.add_var(format!("varpi{slot}"), h2 * VARPI_FLOOR, f64::INFINITY);
        p.set_hint(wv, (tight.varpi[i] * (1.0 - nudge)).max(h2 * VARPI_FLOOR));
        let fa = lin.f[i].affine(&x, &y);
        p.affine_le_zero(format!("varpi{slot}"), Affine::var(wv).plus(&fa.scaled(-1.0)).plus_const(-h2));
        let e = &lin.e[i];
        let den = e.at + a;
        logs2.push((plan.phi2 * bw, Affine::term(wv, 1.0 / den)));
        rhs2 = rhs2.plus_term(wv, plan.phi2 * e.slope).plus_const(-plan.phi2 * e.slope * e.at);

        kappa[i] = Some(kv);
        varpi[i] = Some(wv);
    }
    p.log_ge("phase2-rate", logs2, rhs2);

    Ok((p, TrajVars { qx, qy, lambda, nu, kappa, varpi, vartheta, omega, energy_const }))
}

/// Solves the trajectory block with powers and `alpha` held fixed. On an
/// infeasible or failed solve the slack hints are reseeded further inside
/// and the solve is repeated once.
pub fn solve_trajectory_subproblem(
    powers: &PowerSchedule,
    alpha: f64,
    prev: &Solution,
    scn: &Scenario,
    phi_l: f64,
) -> Result<TrajectorySubproblemSolution> {
    let plan = PhasePlan::new(scn, alpha)?;
    let expansion = Solution { powers: powers.clone(), ..prev.clone() };
    let lin = linearize_terms(&expansion, scn)?;
    let floor = omega_floor(&prev.trajectory, powers, &plan, scn)?;
    let mut last = None;
    for (attempt, nudge) in [NUDGE, RETRY_NUDGE].into_iter().enumerate() {
        let (prog, vars) =
            build_trajectory_program(powers, &plan, &prev.trajectory, &lin, scn, phi_l, nudge, floor)?;
        let report = convex::solve(&prog, scn.solver_tol, MAX_NEWTON);
        let usable = report.status == SolveStatus::Optimal
            || (report.status == SolveStatus::MaxIterations && prog.max_violation(&report.x) == 0.0);
        if usable {
            return Ok(extract_trajectory(prog, report, vars, attempt + 1, scn));
        }
        last = Some(report);
    }
    let report = last.expect("at least one attempt");
    Err(Error::Solver(format!(
        "trajectory subproblem failed twice (status {:?}, feasibility residual {:e})",
        report.status, report.kkt_feasibility_residual
    )))
}

fn extract_trajectory(
    program: ConvexProgram,
    report: SolveReport,
    vars: TrajVars,
    attempts: usize,
    scn: &Scenario,
) -> TrajectorySubproblemSolution {
    let x = &report.x;
    let n = scn.n_total();
    let mut waypoints = Vec::with_capacity(n + 1);
    waypoints.push(scn.q_start);
    for (vx, vy) in vars.qx.iter().zip(&vars.qy) {
        waypoints.push(Vec2::new(x[vx.0], x[vy.0]));
    }
    waypoints.push(scn.q_end);
    let trajectory = Trajectory::new(waypoints);
    let tight = seed_slacks(&trajectory, scn);
    let pick = |ids: &[Option<VarId>], fallback: &[f64]| -> Vec<f64> {
        ids.iter().zip(fallback).map(|(id, &f)| id.map_or(f, |v| x[v.0])).collect()
    };
    let slacks = Slacks {
        lambda: vars.lambda.iter().map(|v| x[v.0]).collect(),
        nu: pick(&vars.nu, &tight.nu),
        kappa: pick(&vars.kappa, &tight.kappa),
        varpi: pick(&vars.varpi, &tight.varpi),
        vartheta: pick(&vars.vartheta, &tight.vartheta),
    };
    let omega3 = x[vars.omega.0];
    let objective = report.objective - vars.energy_const;
    TrajectorySubproblemSolution {
        trajectory,
        slacks,
        omega3,
        objective,
        record: SolveRecord { program, report, attempts },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Scenario {
        Scenario { n1: 4, n2: 4, ..Scenario::reference() }
    }

    fn start(scn: &Scenario) -> Solution {
        let traj = Trajectory::straight_line(scn.q_start, scn.q_end, scn.n_total());
        let p_src = source_power_caps(&traj, scn).unwrap();
        let powers = PowerSchedule { p_src, p_relay: vec![scn.p_relay_max; scn.n2] };
        Solution {
            trajectory: traj,
            powers,
            alpha: 0.5,
            csee: 0.0,
            acsr_lb: 0.0,
            energy: 0.0,
            iterations: 0,
            phi_history: vec![],
        }
    }

    #[test]
    fn tight_seeds_meet_every_slack_constraint() {
        let scn = toy();
        let sol = start(&scn);
        let s = seed_slacks(&sol.trajectory, &scn);
        let h2 = scn.altitude * scn.altitude;
        for (i, &v) in s.varpi.iter().enumerate() {
            let q = sol.trajectory.slot(scn.n1 + 1 + i);
            let g = channel::worst_case_re_gain(q, &scn);
            assert!((scn.beta0 / v - g).abs() <= 1e-15 * g);
            assert!(v >= h2);
        }
        assert!(s.lambda.iter().all(|&l| l >= D_MIN));
    }

    #[test]
    fn k_slope_at_zero_power() {
        let scn = toy();
        let mut sol = start(&scn);
        sol.powers.p_relay = vec![0.0; scn.n2];
        let lin = linearize_terms(&sol, &scn).unwrap();
        let q = sol.trajectory.slot(scn.n1 + 1);
        let g = channel::worst_case_re_gain(q, &scn);
        let want = scn.bandwidth * g / (scn.noise * LN_2);
        assert!((lin.k[0].slope - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn power_caps_match_covert_bound() {
        let scn = toy();
        let sol = start(&scn);
        let r = solve_power_subproblem(&sol.trajectory, 0.5, &sol, &scn, 1e-3).unwrap();
        let caps = source_power_caps(&sol.trajectory, &scn).unwrap();
        assert_eq!(r.p_src, caps);
        assert_eq!(r.record.report.status, SolveStatus::Optimal);
    }

    #[test]
    fn trajectory_step_does_not_lose_objective() {
        let scn = toy();
        let sol = start(&scn);
        let plan = PhasePlan::new(&scn, 0.5).unwrap();
        let phi = 1e-3;
        let before = surrogate_objective(&sol.trajectory, &sol.powers, &plan, &scn, phi).unwrap();
        let r = solve_trajectory_subproblem(&sol.powers, 0.5, &sol, &scn, phi).unwrap();
        let after = surrogate_objective(&r.trajectory, &sol.powers, &plan, &scn, phi).unwrap();
        assert!(after >= before - 1e-8, "{after} < {before}");
        assert!(r.objective >= before - 1e-8);
    }
}
