//! Alternating optimization over the phase split, the powers and the
//! trajectory, with a Dinkelbach ratio refreshed once per outer iteration.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use crate::channel;
use crate::covert::{self, DetectorEnv};
use crate::energy::{self, alpha_energy_coeffs};
use crate::error::{Error, Result};
use crate::pdsa::{self, PdsaCoefficients};
use crate::rate;
use crate::sca;
use crate::scenario::{PhasePlan, PowerSchedule, Scenario, Solution, Trajectory, Vec2, D_MIN};

/// Default cap on outer iterations.
pub const DEFAULT_MAX_ITERATIONS: usize = 50;
/// Default phase split of the fixed-alpha benchmark.
pub const BEN1_ALPHA: f64 = 0.5;
/// Grid step of the fallback alpha search.
const ALPHA_GRID_STEP: f64 = 1e-4;
/// Distance kept from the speed-limit bounds on alpha.
const ALPHA_MARGIN: f64 = 1e-6;

/// Which blocks are optimized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// All three blocks.
    Prop,
    /// Phase split held at the given value.
    Ben1 { alpha: f64 },
    /// Trajectory held at the straight-line initialization.
    Ben2,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Prop => "prop",
            Mode::Ben1 { .. } => "ben1",
            Mode::Ben2 => "ben2",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prop" => Ok(Mode::Prop),
            "ben1" => Ok(Mode::Ben1 { alpha: BEN1_ALPHA }),
            "ben2" => Ok(Mode::Ben2),
            other => Err(Error::Parse(format!("unknown mode {other:?} (expected prop, ben1 or ben2)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoConfig {
    pub max_iterations: usize,
    /// Relative ratio increase below which the loop stops.
    pub conv_tol: f64,
    pub mode: Mode,
    /// Holds alpha fixed in any mode (used by alpha sweeps).
    pub pinned_alpha: Option<f64>,
}

impl AoConfig {
    pub fn new(scn: &Scenario, mode: Mode) -> Self {
        Self { max_iterations: DEFAULT_MAX_ITERATIONS, conv_tol: scn.conv_tol, mode, pinned_alpha: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.conv_tol > 0.0) {
            return Err(Error::Validation(format!("conv_tol must be > 0, got {}", self.conv_tol)));
        }
        if let Some(a) = self.fixed_alpha() {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::Validation(format!("fixed alpha must lie in (0, 1), got {a}")));
            }
        }
        Ok(())
    }

    pub fn fixed_alpha(&self) -> Option<f64> {
        match self.mode {
            Mode::Ben1 { alpha } => Some(alpha),
            _ => self.pinned_alpha,
        }
    }

    pub fn fixed_trajectory(&self) -> bool {
        self.mode == Mode::Ben2
    }
}

/// Outcome of one block within an outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockStatus {
    Accepted,
    /// Solved, but the candidate lowered the efficiency and was dropped.
    Rejected,
    Skipped,
    Failed,
}

impl BlockStatus {
    fn as_str(self) -> &'static str {
        match self {
            BlockStatus::Accepted => "accepted",
            BlockStatus::Rejected => "rejected",
            BlockStatus::Skipped => "skipped",
            BlockStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoRecord {
    /// 0 is the initialization.
    pub iter: usize,
    /// Efficiency after the iteration, bits/J.
    pub phi: f64,
    pub alpha: f64,
    pub obj_alpha: f64,
    pub obj_power: f64,
    pub obj_traj: f64,
    pub blocks: Option<[BlockStatus; 3]>,
    pub wall_time_s: f64,
}

impl AoRecord {
    pub fn status(&self) -> String {
        match self.blocks {
            None => "init".to_string(),
            Some([a, p, t]) => format!("alpha={};power={};traj={}", a.as_str(), p.as_str(), t.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIterations,
    SubproblemFailed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoTrace {
    pub records: Vec<AoRecord>,
    pub stop: StopReason,
}

impl AoTrace {
    pub fn phis(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.phi).collect()
    }

    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }

    /// CSV with columns `iter, phi, alpha, obj_alpha, obj_power, obj_traj, status`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iter", "phi", "alpha", "obj_alpha", "obj_power", "obj_traj", "status"])
            .map_err(csv_err)?;
        for r in &self.records {
            w.write_record([
                r.iter.to_string(),
                r.phi.to_string(),
                r.alpha.to_string(),
                r.obj_alpha.to_string(),
                r.obj_power.to_string(),
                r.obj_traj.to_string(),
                r.status(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Figures of merit recomputed from scratch for a solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub csee: f64,
    pub acsr_lb: f64,
    /// Efficiency with the phase-2 rates left unclamped.
    pub csee_unclamped: f64,
    pub acsr_unclamped: f64,
    pub energy: f64,
    pub r1_per_slot: Vec<f64>,
    pub r2_per_slot: Vec<f64>,
    /// `cap - p_src` per phase-1 slot, W.
    pub covert_slack: Vec<f64>,
    /// Minimum warden DEP under worst-case gains, phase-1 slots with power.
    pub min_dep_wc: Vec<Option<f64>>,
    pub legs: Vec<f64>,
}

impl Evaluation {
    /// Dinkelbach ratio `acsr_lb / energy` (efficiency per second of period).
    pub fn ratio(&self) -> f64 {
        self.acsr_lb / self.energy
    }
}

pub fn evaluate(scn: &Scenario, sol: &Solution) -> Result<Evaluation> {
    let plan = PhasePlan::new(scn, sol.alpha)?;
    let b = rate::rate_breakdown(&sol.trajectory, &sol.powers, scn, &plan)?;
    let energy = energy::e_sum(&sol.trajectory, &plan, scn)?;
    let acsr_unclamped = rate::acsr_unclamped(&b.r1_per_slot, &b.r2_per_slot, &plan);
    let g_sw = channel::worst_case_sw_gain(scn)?;
    let mut covert_slack = Vec::with_capacity(scn.n1);
    let mut min_dep_wc = Vec::with_capacity(scn.n1);
    for (i, &p) in sol.powers.p_src.iter().enumerate() {
        let g_rw = channel::worst_case_rw_gain(sol.trajectory.slot(i + 1), scn);
        covert_slack.push(covert::covert_power_cap(g_sw, g_rw, scn.p_jam_max, scn.epsilon_covert) - p);
        min_dep_wc.push(if p > 0.0 {
            let env = DetectorEnv { p_src: p, g_sw_mean: g_sw, g_rw, p_jam_max: scn.p_jam_max, noise: scn.noise };
            covert::min_dep(&env).ok().map(|r| r.0)
        } else {
            None
        });
    }
    Ok(Evaluation {
        csee: energy::csee(b.acsr_lb, energy, scn.period)?,
        acsr_lb: b.acsr_lb,
        csee_unclamped: energy::csee(acsr_unclamped, energy, scn.period)?,
        acsr_unclamped,
        energy,
        r1_per_slot: b.r1_per_slot,
        r2_per_slot: b.r2_per_slot,
        covert_slack,
        min_dep_wc,
        legs: sol.trajectory.legs(),
    })
}

/// `n` equal legs from `start` to `end`. When the straight legs would be
/// shorter than the minimum leg length, the waypoints are placed on a
/// circular arc through both endpoints with legs just above the minimum.
pub fn initial_trajectory(start: Vec2, end: Vec2, n: usize) -> Trajectory {
    let len = start.dist(end);
    let leg = D_MIN * (1.0 + 1e-6);
    if n < 2 || len / n as f64 >= leg {
        return Trajectory::straight_line(start, end, n);
    }
    // chord of n legs of length `leg` spanning total angle `theta`
    let nf = n as f64;
    let chord = |theta: f64| leg * (0.5 * theta).sin() / (0.5 * theta / nf).sin();
    let (mut lo, mut hi) = (1e-9, 2.0 * std::f64::consts::PI);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chord(mid) > len {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    let radius = leg / (2.0 * (0.5 * theta / nf).sin());
    let e = if len > 0.0 { (end - start) * (1.0 / len) } else { Vec2::new(1.0, 0.0) };
    let perp = Vec2::new(-e.y, e.x);
    let mid = (start + end) * 0.5;
    let center = mid + perp * (radius * (0.5 * theta).cos());
    let a0 = (start.y - center.y).atan2(start.x - center.x);
    let mut waypoints: Vec<Vec2> = (0..=n)
        .map(|k| {
            let a = a0 + theta * k as f64 / nf;
            center + Vec2::new(a.cos(), a.sin()) * radius
        })
        .collect();
    if waypoints[n].dist(end) > 1e-6 * (1.0 + radius) {
        for (k, w) in waypoints.iter_mut().enumerate() {
            let a = a0 - theta * k as f64 / nf;
            *w = center + Vec2::new(a.cos(), a.sin()) * radius;
        }
    }
    waypoints[0] = start;
    waypoints[n] = end;
    Trajectory::new(waypoints)
}

fn alpha_bounds(traj: &Trajectory, scn: &Scenario) -> (f64, f64) {
    let (b1, b2) = pdsa::beta_margins(&traj.legs(), scn);
    (b1 + ALPHA_MARGIN, 1.0 - b2 - ALPHA_MARGIN)
}

fn finish(scn: &Scenario, mut sol: Solution) -> Result<(Solution, Evaluation)> {
    let ev = evaluate(scn, &sol)?;
    sol.csee = ev.csee;
    sol.acsr_lb = ev.acsr_lb;
    sol.energy = ev.energy;
    Ok((sol, ev))
}

/// Straight-line trajectory, covert-capped source power, full relay power
/// and `alpha = 0.5` (or the fixed alpha of the mode), moved inside the
/// speed-feasible interval when needed.
pub fn initialize(scn: &Scenario, cfg: &AoConfig) -> Result<Solution> {
    scn.validate()?;
    cfg.validate()?;
    let traj = initial_trajectory(scn.q_start, scn.q_end, scn.n_total());
    let (lo, hi) = alpha_bounds(&traj, scn);
    if lo > hi {
        return Err(Error::InfeasibleStart(format!(
            "straight line needs alpha >= {lo} and alpha <= {hi}; v_max is too small"
        )));
    }
    let alpha = match cfg.fixed_alpha() {
        Some(a) if a < lo || a > hi => {
            return Err(Error::InfeasibleStart(format!(
                "fixed alpha {a} is outside the speed-feasible interval [{lo}, {hi}]"
            )))
        }
        Some(a) => a,
        None => 0.5f64.clamp(lo, hi),
    };
    let powers = PowerSchedule {
        p_src: sca::source_power_caps(&traj, scn)?,
        p_relay: vec![scn.p_relay_max; scn.n2],
    };
    let sol = Solution {
        trajectory: traj,
        powers,
        alpha,
        csee: 0.0,
        acsr_lb: 0.0,
        energy: 0.0,
        iterations: 0,
        phi_history: Vec::new(),
    };
    let (mut sol, ev) = finish(scn, sol)?;
    sol.phi_history.push(ev.csee);
    Ok(sol)
}

/// Phase-split block: closed-form case analysis, with a grid search when
/// the case analysis does not apply. Returns `(alpha, objective)`.
pub fn alpha_step(sol: &Solution, scn: &Scenario, phi: f64) -> Result<(f64, f64)> {
    let traj = &sol.trajectory;
    let legs = traj.legs();
    let energy = alpha_energy_coeffs(&legs, scn)?;
    let (rho1, rho2) = pdsa::mean_rates(traj, &sol.powers, scn)?;
    let (beta1, beta2) = pdsa::beta_margins(&legs, scn);
    let mut c = PdsaCoefficients {
        rho1,
        rho2,
        beta1,
        beta2,
        alpha_hat1: f64::NAN,
        alpha_hat2: pdsa::alpha_hat2(rho1, rho2),
        alpha_hat3: f64::NAN,
    };
    let closed = if rho1 + rho2 > 0.0 {
        pdsa::alpha_roots(&energy, rho1, rho2, phi).ok().and_then(|(h1, h3)| {
            c.alpha_hat1 = h1;
            c.alpha_hat3 = h3;
            pdsa::pdsa_alpha(&c, &energy, phi).ok().map(|r| r.0)
        })
    } else {
        None
    };
    let alpha = match closed {
        Some(a) => a,
        None => pdsa::alpha_grid_oracle(&c, &energy, phi, ALPHA_GRID_STEP)?,
    };
    let (lo, hi) = (beta1 + ALPHA_MARGIN, 1.0 - beta2 - ALPHA_MARGIN);
    let alpha = if lo <= hi { alpha.clamp(lo, hi) } else { alpha };
    Ok((alpha, pdsa::alpha_objective(&c, &energy, phi, alpha)))
}

/// Accepts `cand` iff it evaluates and does not lower the efficiency.
fn guard(scn: &Scenario, cur: &mut Solution, ev: &mut Evaluation, cand: Solution) -> BlockStatus {
    match evaluate(scn, &cand) {
        Ok(e) if e.csee >= ev.csee => {
            *cur = cand;
            *ev = e;
            BlockStatus::Accepted
        }
        _ => BlockStatus::Rejected,
    }
}

#[derive(Debug, Clone, Copy)]
pub enum BlockResult<'a> {
    Power(&'a sca::PowerSubproblemSolution),
    Trajectory(&'a sca::TrajectorySubproblemSolution),
}

/// A subproblem result as the loop sees it, before the acceptance guard.
#[derive(Debug, Clone, Copy)]
pub struct BlockOutput<'a> {
    pub iter: usize,
    /// Ratio weight the subproblem was solved with.
    pub phi: f64,
    /// Iterate the subproblem was expanded at.
    pub input: &'a Solution,
    /// `input` with the block's variables replaced by the subproblem output.
    pub candidate: &'a Solution,
    pub result: BlockResult<'a>,
}

impl BlockOutput<'_> {
    pub fn record(&self) -> &sca::SolveRecord {
        match self.result {
            BlockResult::Power(p) => &p.record,
            BlockResult::Trajectory(t) => &t.record,
        }
    }

    pub fn block_name(&self) -> &'static str {
        match self.result {
            BlockResult::Power(_) => "power",
            BlockResult::Trajectory(_) => "trajectory",
        }
    }
}

/// Runs the alternating optimization and returns the last iterate with its
/// trace. Iteration 0 of the trace is the initialization.
pub fn ao_solve(scn: &Scenario, cfg: &AoConfig) -> Result<(Solution, AoTrace)> {
    ao_solve_observed(scn, cfg, |_| {})
}

/// [`ao_solve`] that hands every power and trajectory subproblem output to
/// `observe`.
pub fn ao_solve_observed(
    scn: &Scenario,
    cfg: &AoConfig,
    mut observe: impl FnMut(BlockOutput<'_>),
) -> Result<(Solution, AoTrace)> {
    let clock = Instant::now();
    let mut cur = initialize(scn, cfg)?;
    let mut ev = evaluate(scn, &cur)?;
    let mut records = vec![AoRecord {
        iter: 0,
        phi: ev.csee,
        alpha: cur.alpha,
        obj_alpha: f64::NAN,
        obj_power: f64::NAN,
        obj_traj: f64::NAN,
        blocks: None,
        wall_time_s: clock.elapsed().as_secs_f64(),
    }];
    let mut stop = StopReason::MaxIterations;

    for iter in 1..=cfg.max_iterations {
        let prev_csee = ev.csee;
        let phi = ev.ratio();
        let mut failure = None;

        let (s_alpha, obj_alpha) = if cfg.fixed_alpha().is_some() {
            (BlockStatus::Skipped, f64::NAN)
        } else {
            let (alpha, obj) = alpha_step(&cur, scn, phi)?;
            let cand = Solution { alpha, ..cur.clone() };
            (guard(scn, &mut cur, &mut ev, cand), obj)
        };

        let (s_power, obj_power) = match sca::solve_power_subproblem(&cur.trajectory, cur.alpha, &cur, scn, phi) {
            Ok(p) => {
                let cand = Solution {
                    powers: PowerSchedule { p_src: p.p_src.clone(), p_relay: p.p_relay.clone() },
                    ..cur.clone()
                };
                observe(BlockOutput { iter, phi, input: &cur, candidate: &cand, result: BlockResult::Power(&p) });
                (guard(scn, &mut cur, &mut ev, cand), p.objective)
            }
            Err(Error::Solver(msg)) => {
                failure = Some(format!("power block: {msg}"));
                (BlockStatus::Failed, f64::NAN)
            }
            Err(e) => return Err(e),
        };

        let (s_traj, obj_traj) = if cfg.fixed_trajectory() || failure.is_some() {
            (BlockStatus::Skipped, f64::NAN)
        } else {
            match sca::solve_trajectory_subproblem(&cur.powers, cur.alpha, &cur, scn, phi) {
                Ok(t) => {
                    let cand = Solution { trajectory: t.trajectory.clone(), ..cur.clone() };
                    observe(BlockOutput {
                        iter,
                        phi,
                        input: &cur,
                        candidate: &cand,
                        result: BlockResult::Trajectory(&t),
                    });
                    (guard(scn, &mut cur, &mut ev, cand), t.objective)
                }
                Err(Error::Solver(msg)) => {
                    failure = Some(format!("trajectory block: {msg}"));
                    (BlockStatus::Failed, f64::NAN)
                }
                Err(e) => return Err(e),
            }
        };

        cur.iterations = iter;
        cur.phi_history.push(ev.csee);
        records.push(AoRecord {
            iter,
            phi: ev.csee,
            alpha: cur.alpha,
            obj_alpha,
            obj_power,
            obj_traj,
            blocks: Some([s_alpha, s_power, s_traj]),
            wall_time_s: clock.elapsed().as_secs_f64(),
        });
        if let Some(msg) = failure {
            stop = StopReason::SubproblemFailed(msg);
            break;
        }
        if ev.csee - prev_csee <= cfg.conv_tol * prev_csee.abs() {
            stop = StopReason::Converged;
            break;
        }
    }
    let (sol, _) = finish(scn, cur)?;
    Ok((sol, AoTrace { records, stop }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_round_trip() {
        for m in ["prop", "ben1", "ben2"] {
            assert_eq!(m.parse::<Mode>().unwrap().name(), m);
        }
        assert!("best".parse::<Mode>().is_err());
    }

    #[test]
    fn arc_initialization_keeps_minimum_leg() {
        let p = Vec2::new(10.0, -4.0);
        for (end, n) in [(p, 7), (p, 8), (p + Vec2::new(0.002, 0.0), 9), (p, 2)] {
            let t = initial_trajectory(p, end, n);
            assert_eq!(t.waypoints[0], p);
            assert_eq!(t.waypoints[n], end);
            for d in t.legs() {
                assert!((D_MIN..1.01 * D_MIN).contains(&d), "{d}");
            }
        }
    }

    #[test]
    fn zero_iterations_returns_initialization() {
        let scn = Scenario { n1: 3, n2: 3, ..Scenario::reference() };
        let cfg = AoConfig { max_iterations: 0, ..AoConfig::new(&scn, Mode::Prop) };
        let (sol, trace) = ao_solve(&scn, &cfg).unwrap();
        assert_eq!(sol, initialize(&scn, &cfg).unwrap());
        assert_eq!(trace.records.len(), 1);
    }

    #[test]
    fn reference_start_is_a_straight_line() {
        let scn = Scenario { n1: 50, n2: 50, ..Scenario::reference() };
        let sol = initialize(&scn, &AoConfig::new(&scn, Mode::Prop)).unwrap();
        for d in sol.trajectory.legs() {
            assert!((d - 7.0).abs() < 1e-9);
        }
        assert_eq!(sol.alpha, 0.5);
    }
}
