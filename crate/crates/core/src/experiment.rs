//! Experiment harness: parameter sweeps over the optimizer, CSV artifacts, and
//! the verification suites that compare closed forms against independent
//! reference computations.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ao::{self, csv_err, AoConfig, Mode, StopReason};
use crate::channel::{self, GainSet};
use crate::covert::{self, CovertMcConfig, DetectorEnv};
use crate::energy::{self, alpha_energy_coeffs};
use crate::error::{Error, Result};
use crate::pdsa;
use crate::rate;
use crate::sca::{self, linearize_terms};
use crate::scenario::{PowerSchedule, Scenario, Solution, Trajectory, Vec2, D_MIN};

/// Scenario knob varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    EpsilonCovert,
    Period,
    PJamMax,
    /// Sets both uncertainty radii.
    RUncertainty,
    /// Pins the phase-switching factor instead of optimizing it.
    AlphaFixed,
}

impl SweepParam {
    pub const ALL: [SweepParam; 5] = [
        SweepParam::EpsilonCovert,
        SweepParam::Period,
        SweepParam::PJamMax,
        SweepParam::RUncertainty,
        SweepParam::AlphaFixed,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::EpsilonCovert => "epsilon_covert",
            SweepParam::Period => "period",
            SweepParam::PJamMax => "p_jam_max",
            SweepParam::RUncertainty => "r_uncertainty",
            SweepParam::AlphaFixed => "alpha_fixed",
        }
    }

    /// Scenario and solver configuration for one sweep point.
    pub fn apply(&self, base: &Scenario, mode: Mode, value: f64) -> (Scenario, AoConfig) {
        let mut scn = base.clone();
        match self {
            SweepParam::EpsilonCovert => scn.epsilon_covert = value,
            SweepParam::Period => scn.period = value,
            SweepParam::PJamMax => scn.p_jam_max = value,
            SweepParam::RUncertainty => {
                scn.r_warden = value;
                scn.r_eaves = value;
            }
            SweepParam::AlphaFixed => {}
        }
        let mut cfg = AoConfig::new(&scn, mode);
        if *self == SweepParam::AlphaFixed {
            cfg.pinned_alpha = Some(value);
        }
        (scn, cfg)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown sweep parameter '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub modes: Vec<Mode>,
    /// Recorded for reproducibility; the optimizer itself is deterministic.
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Validation("sweep needs at least one value".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Validation("sweep needs at least one mode".into()));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("sweep value {v} is not finite")));
        }
        let up = self.values.windows(2).all(|w| w[1] > w[0]);
        let down = self.values.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(Error::Validation("sweep values must be strictly monotone".into()));
        }
        Ok(())
    }
}

/// Parses `"0.1,0.2, 0.5"`.
pub fn parse_values(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{t}'")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub mode: Mode,
    pub param: SweepParam,
    pub value: f64,
    pub csee: f64,
    pub acsr_lb: f64,
    pub energy: f64,
    pub alpha: f64,
    pub iterations: usize,
    /// `converged`, `max-iterations`, or the failure message.
    pub status: String,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.status == "converged" || self.status == "max-iterations"
    }
}

/// Solves one sweep point. Failures end up in the status column.
pub fn run_point(base: &Scenario, param: SweepParam, mode: Mode, value: f64) -> SweepRow {
    let failed = |status: String| SweepRow {
        mode,
        param,
        value,
        csee: f64::NAN,
        acsr_lb: f64::NAN,
        energy: f64::NAN,
        alpha: f64::NAN,
        iterations: 0,
        status,
    };
    let (scn, cfg) = param.apply(base, mode, value);
    if let Err(e) = scn.validate().and_then(|_| cfg.validate()) {
        return failed(format!("invalid: {e}"));
    }
    match ao::ao_solve(&scn, &cfg) {
        Ok((sol, trace)) => SweepRow {
            mode,
            param,
            value,
            csee: sol.csee,
            acsr_lb: sol.acsr_lb,
            energy: sol.energy,
            alpha: sol.alpha,
            iterations: sol.iterations,
            status: match trace.stop {
                StopReason::Converged => "converged".into(),
                StopReason::MaxIterations => "max-iterations".into(),
                StopReason::SubproblemFailed(m) => format!("subproblem failed: {m}"),
            },
        },
        Err(e) => failed(format!("error: {e}")),
    }
}

/// Runs every `(mode, value)` pair in parallel; rows come back mode-major, in
/// the order the modes and values were listed.
pub fn run_sweep(base: &Scenario, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let points: Vec<(Mode, f64)> = spec
        .modes
        .iter()
        .flat_map(|&m| spec.values.iter().map(move |&v| (m, v)))
        .collect();
    Ok(points.into_par_iter().map(|(m, v)| run_point(base, spec.param, m, v)).collect())
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["mode", "param", "value", "csee", "acsr_lb", "energy", "alpha", "iterations", "status"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.mode.name().to_string(),
            r.param.name().to_string(),
            r.value.to_string(),
            r.csee.to_string(),
            r.acsr_lb.to_string(),
            r.energy.to_string(),
            r.alpha.to_string(),
            r.iterations.to_string(),
            r.status.clone(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Waypoint table: `slot, phase, x, y, p_src, p_relay`. Slot 0 is the
/// take-off point (phase `start`); slot `n` carries the power used while
/// flying the leg that ends there, and the column of the other phase is empty.
pub fn write_solution_csv<W: Write>(scn: &Scenario, sol: &Solution, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["slot", "phase", "x", "y", "p_src", "p_relay"]).map_err(csv_err)?;
    for (k, q) in sol.trajectory.waypoints.iter().enumerate() {
        let (phase, ps, pr) = if k == 0 {
            ("start", String::new(), String::new())
        } else if k <= scn.n1 {
            ("1", sol.powers.p_src[k - 1].to_string(), String::new())
        } else {
            ("2", String::new(), sol.powers.p_relay[k - 1 - scn.n1].to_string())
        };
        w.write_record([k.to_string(), phase.to_string(), q.x.to_string(), q.y.to_string(), ps, pr])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// One line of human-readable figures for a finished solve.
pub fn summary_line(mode: Mode, sol: &Solution, stop: &StopReason) -> String {
    format!(
        "mode={} csee={:.6e} acsr_lb={:.6} energy={:.3} alpha={:.6} iterations={} stop={:?}",
        mode, sol.csee, sol.acsr_lb, sol.energy, sol.alpha, sol.iterations, stop
    )
}

// ---------------------------------------------------------------------------
// Verification suites

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Dep,
    Jensen,
    EnergyBound,
    Pdsa,
    Linearization,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Dep, Suite::Jensen, Suite::EnergyBound, Suite::Pdsa, Suite::Linearization];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Dep => "dep",
            Suite::Jensen => "jensen",
            Suite::EnergyBound => "energy-bound",
            Suite::Pdsa => "pdsa",
            Suite::Linearization => "linearization",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown verification suite '{s}'")))
    }
}

/// One comparison. `pass` means `residual <= tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub suite: &'static str,
    pub check: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRow {
    fn new(suite: Suite, check: String, residual: f64, tolerance: f64) -> Self {
        Self { suite: suite.name(), check, residual, tolerance, pass: residual <= tolerance }
    }
}

pub fn write_checks_csv<W: Write>(rows: &[CheckRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["suite", "check", "residual", "tolerance", "pass"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.suite.to_string(),
            r.check.clone(),
            r.residual.to_string(),
            r.tolerance.to_string(),
            r.pass.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub const DEP_GRID_POINTS: usize = 100;
pub const DEP_SAMPLES: usize = 1_000_000;
pub const JENSEN_CONFIGS: usize = 10;
pub const JENSEN_SAMPLES: usize = 100_000;
pub const PDSA_INSTANCES: usize = 50;
pub const PDSA_GRID_STEP: f64 = 1e-4;
pub const LINEARIZATION_TRIALS: usize = 10_000;

/// Runs one suite. Deterministic for a fixed scenario and seed.
pub fn run_verify(suite: Suite, scn: &Scenario, seed: u64) -> Result<Vec<CheckRow>> {
    match suite {
        Suite::Dep => verify_dep(scn, seed, DEP_GRID_POINTS, DEP_SAMPLES),
        Suite::Jensen => verify_jensen(scn, seed, JENSEN_CONFIGS, JENSEN_SAMPLES),
        Suite::EnergyBound => Ok(verify_energy_bound(scn)),
        Suite::Pdsa => verify_pdsa(scn, seed, PDSA_INSTANCES),
        Suite::Linearization => verify_linearization(scn, seed, LINEARIZATION_TRIALS),
    }
}

/// The warden's test at the first phase-1 slot of the straight-line start,
/// with the source at its covert cap and worst-case gains.
pub fn reference_detector(scn: &Scenario) -> Result<DetectorEnv> {
    let traj = Trajectory::straight_line(scn.q_start, scn.q_end, scn.n_total());
    let caps = sca::source_power_caps(&traj, scn)?;
    Ok(DetectorEnv {
        p_src: caps[0],
        g_sw_mean: channel::worst_case_sw_gain(scn)?,
        g_rw: channel::worst_case_rw_gain(traj.slot(1), scn),
        p_jam_max: scn.p_jam_max,
        noise: scn.noise,
    })
}

/// Closed-form DEP against Monte Carlo on an even threshold grid over
/// `[0, 1.2 z3]`; the tolerance is three standard errors.
pub fn verify_dep(scn: &Scenario, seed: u64, points: usize, samples: usize) -> Result<Vec<CheckRow>> {
    let env = reference_detector(scn)?;
    let top = 1.2 * env.breakpoints().z3;
    Ok((0..points)
        .map(|i| {
            let tau = top * i as f64 / (points - 1).max(1) as f64;
            let mc = covert::mc_dep(tau, &env, CovertMcConfig { samples, seed: seed.wrapping_add(i as u64) });
            let closed = covert::dep(tau, &env);
            CheckRow::new(Suite::Dep, format!("tau={tau:e}"), (closed - mc.value).abs(), 3.0 * mc.se)
        })
        .collect())
}

/// Random phase-1 links: the Monte-Carlo mean rate must not fall below the
/// deterministic bound by more than three standard errors, and the two agree
/// exactly without self-interference.
pub fn verify_jensen(scn: &Scenario, seed: u64, configs: usize, samples: usize) -> Result<Vec<CheckRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(configs + 1);
    for i in 0..configs {
        let p_src = rng.random_range(0.01..=scn.p_src_max.max(0.01));
        let q = Vec2::new(rng.random_range(-300.0..300.0), rng.random_range(-300.0..300.0));
        let g_sr = channel::a2g_gain(q, Vec2::new(0.0, 0.0), scn.altitude, scn.beta0);
        let pj = rng.random_range(0.1..2.0);
        let sic = scn.sic_level * 10f64.powf(rng.random_range(-1.0..2.0));
        let bound = rate::r1_sec_slot(p_src, g_sr, pj, sic, scn.noise, scn.bandwidth);
        let (mean, se) =
            rate::mc_r1_exact(p_src, g_sr, pj, sic, scn.noise, scn.bandwidth, samples, seed.wrapping_add(i as u64 + 1));
        rows.push(CheckRow::new(
            Suite::Jensen,
            format!("config {i}: bound - mc_mean"),
            bound - mean,
            3.0 * se,
        ));
    }
    let g = channel::a2g_gain(Vec2::new(50.0, 0.0), Vec2::new(0.0, 0.0), scn.altitude, scn.beta0);
    let bound = rate::r1_sec_slot(scn.p_src_max, g, scn.p_jam_max, 0.0, scn.noise, scn.bandwidth);
    let (mean, _) = rate::mc_r1_exact(scn.p_src_max, g, scn.p_jam_max, 0.0, scn.noise, scn.bandwidth, samples, seed);
    rows.push(CheckRow::new(Suite::Jensen, "zero self-interference".into(), (bound - mean).abs(), 0.0));
    Ok(rows)
}

/// Surrogate minus exact propulsion power on a 0.01 m/s grid over
/// `[0.5, 60]`; the worst margin must be nonnegative.
pub fn verify_energy_bound(scn: &Scenario) -> Vec<CheckRow> {
    let mut worst = f64::INFINITY;
    let mut at = 0.0;
    for i in 0..=5950 {
        let v = 0.5 + 0.01 * i as f64;
        let approx = energy::propulsion_power_approx(v, &scn.rotor).unwrap_or(f64::NEG_INFINITY);
        let gap = approx - energy::propulsion_power_exact(v, &scn.rotor);
        if gap < worst {
            worst = gap;
            at = v;
        }
    }
    vec![CheckRow::new(Suite::EnergyBound, format!("min(approx - exact) at v={at}"), -worst, 0.0)]
}

/// A random phase-switching instance: legs of a feasible trajectory, mean
/// rates, and a ratio weight spread around the energy slope.
pub fn random_pdsa_instance(
    scn: &Scenario,
    rng: &mut ChaCha8Rng,
) -> Result<(pdsa::PdsaCoefficients, energy::AlphaEnergyCoeffs, f64)> {
    let n = scn.n_total();
    // Keep both phases speed-feasible at alpha = 1/2 with room to spare.
    let d_cap = 0.4 * scn.period * scn.v_max / n as f64;
    let legs: Vec<f64> = (0..n).map(|_| rng.random_range((10.0 * D_MIN)..d_cap)).collect();
    let e = alpha_energy_coeffs(&legs, scn)?;
    let rho1 = rng.random_range(0.1..12.0);
    let rho2 = rng.random_range(0.1..12.0);
    let slope = e.derivative(0.25).abs() + e.derivative(0.75).abs() + 1e-12;
    let phi = rng.random_range(0.0..3.0) * (rho1 + rho2) / slope;
    let (beta1, beta2) = pdsa::beta_margins(&legs, scn);
    let (alpha_hat1, alpha_hat3) = pdsa::alpha_roots(&e, rho1, rho2, phi)?;
    let c = pdsa::PdsaCoefficients {
        rho1,
        rho2,
        beta1,
        beta2,
        alpha_hat1,
        alpha_hat2: pdsa::alpha_hat2(rho1, rho2),
        alpha_hat3,
    };
    Ok((c, e, phi))
}

/// Closed-form phase split against a dense grid search: objective gap and
/// KKT residuals per instance.
pub fn verify_pdsa(scn: &Scenario, seed: u64, instances: usize) -> Result<Vec<CheckRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(2 * instances);
    for i in 0..instances {
        let (c, e, phi) = random_pdsa_instance(scn, &mut rng)?;
        let (alpha, diag) = pdsa::pdsa_alpha(&c, &e, phi)?;
        let grid = pdsa::alpha_grid_oracle(&c, &e, phi, PDSA_GRID_STEP)?;
        let best = pdsa::alpha_objective(&c, &e, phi, grid);
        let got = pdsa::alpha_objective(&c, &e, phi, alpha);
        rows.push(CheckRow::new(
            Suite::Pdsa,
            format!("instance {i} ({:?}): grid max - objective", diag.case_taken),
            best - got,
            1e-4 * (1.0 + best.abs()),
        ));
        rows.push(CheckRow::new(
            Suite::Pdsa,
            format!("instance {i}: kkt residual"),
            diag.stationarity_residual.max(diag.complementarity_residual),
            1e-6 * (1.0 + c.rho1 + c.rho2),
        ));
    }
    Ok(rows)
}

/// A random expansion point near the straight-line start: every waypoint
/// jittered by up to `jitter` meters, powers uniform in their boxes.
pub fn random_expansion(scn: &Scenario, rng: &mut ChaCha8Rng, jitter: f64) -> Solution {
    let n = scn.n_total();
    let mut traj = Trajectory::straight_line(scn.q_start, scn.q_end, n);
    for q in traj.waypoints.iter_mut().take(n).skip(1) {
        q.x += rng.random_range(-jitter..=jitter);
        q.y += rng.random_range(-jitter..=jitter);
    }
    let powers = PowerSchedule {
        p_src: (0..scn.n1).map(|_| rng.random_range(0.0..=scn.p_src_max)).collect(),
        p_relay: (0..scn.n2).map(|_| rng.random_range(0.0..=scn.p_relay_max)).collect(),
    };
    Solution {
        trajectory: traj,
        powers,
        alpha: 0.5,
        csee: 0.0,
        acsr_lb: 0.0,
        energy: 0.0,
        iterations: 0,
        phi_history: Vec::new(),
    }
}

/// The first-order bounds against the functions they replace, at random
/// points around a random expansion: `K` must over-estimate, `B` and `F`
/// must under-estimate, and each must be tight where it was taken.
pub fn verify_linearization(scn: &Scenario, seed: u64, trials: usize) -> Result<Vec<CheckRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exp = random_expansion(scn, &mut rng, 30.0);
    let lin = linearize_terms(&exp, scn)?;
    let bw = scn.bandwidth / std::f64::consts::LN_2;
    let g = GainSet::compute(&exp.trajectory, scn)?;
    let n1 = scn.n1;

    let k_true = |i: usize, p: f64| bw * (scn.noise + p * g.g_re_wc[i]).ln();
    let b_true = |dq: Vec2| dq.norm_sq();
    let f_true = |q: Vec2| {
        let gap = (q.dist(scn.q_eaves_est) - scn.r_eaves).max(0.0);
        gap * gap
    };
    let rel = |a: f64, b: f64| (a - b).abs() / (1.0 + b.abs());

    let mut tangency = 0.0f64;
    for (i, k) in lin.k.iter().enumerate() {
        tangency = tangency.max(rel(k.eval(k.at), k_true(i, k.at)));
    }
    for b in &lin.b {
        tangency = tangency.max(rel(b.eval(b.at), b_true(b.at)));
    }
    for f in &lin.f {
        tangency = tangency.max(rel(f.eval(f.at), f_true(f.at)));
    }

    let (mut k_worst, mut b_worst, mut f_worst) = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for _ in 0..trials {
        let i = rng.random_range(0..scn.n2);
        let p = rng.random_range(0.0..=scn.p_relay_max);
        k_worst = k_worst.max(k_true(i, p) - lin.k[i].eval(p));

        let j = rng.random_range(0..lin.b.len());
        let dq = Vec2::new(rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0));
        b_worst = b_worst.max(lin.b[j].eval(dq) - b_true(dq));

        let m = rng.random_range(0..scn.n2);
        let center = exp.trajectory.slot(n1 + 1 + m);
        let q = center + Vec2::new(rng.random_range(-200.0..200.0), rng.random_range(-200.0..200.0));
        f_worst = f_worst.max(lin.f[m].eval(q) - f_true(q));
    }
    // Round-off in the tangent evaluations scales with the magnitudes involved.
    let k_tol = 1e-12 * (1.0 + bw * scn.noise.ln().abs());
    Ok(vec![
        CheckRow::new(Suite::Linearization, "tangency at the expansion point (relative)".into(), tangency, 1e-9),
        CheckRow::new(Suite::Linearization, "K over-estimates".into(), k_worst, k_tol),
        CheckRow::new(Suite::Linearization, "B under-estimates".into(), b_worst, 1e-9),
        CheckRow::new(Suite::Linearization, "F under-estimates".into(), f_worst, 1e-9),
    ])
}

/// The phase-split step at the initialization of a scenario, solved both in
/// closed form and by grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaOracleReport {
    pub phi: f64,
    pub alpha_pdsa: f64,
    pub alpha_grid: f64,
    pub objective_pdsa: f64,
    pub objective_grid: f64,
    pub case: String,
}

pub fn oracle_alpha(scn: &Scenario, step: f64) -> Result<AlphaOracleReport> {
    let cfg = AoConfig::new(scn, Mode::Prop);
    let sol = ao::initialize(scn, &cfg)?;
    let phi = ao::evaluate(scn, &sol)?.ratio();
    let (c, e) = pdsa::pdsa_coeffs(&sol.trajectory, &sol.powers, scn, phi)?;
    let (alpha_pdsa, diag) = pdsa::pdsa_alpha(&c, &e, phi)?;
    let alpha_grid = pdsa::alpha_grid_oracle(&c, &e, phi, step)?;
    Ok(AlphaOracleReport {
        phi,
        alpha_pdsa,
        alpha_grid,
        objective_pdsa: pdsa::alpha_objective(&c, &e, phi, alpha_pdsa),
        objective_grid: pdsa::alpha_objective(&c, &e, phi, alpha_grid),
        case: format!("{:?}", diag.case_taken),
    })
}

pub fn write_oracle_csv<W: Write>(r: &AlphaOracleReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["phi", "alpha_pdsa", "alpha_grid", "objective_pdsa", "objective_grid", "case"])
        .map_err(csv_err)?;
    w.write_record([
        r.phi.to_string(),
        r.alpha_pdsa.to_string(),
        r.alpha_grid.to_string(),
        r.objective_pdsa.to_string(),
        r.objective_grid.to_string(),
        r.case.clone(),
    ])
    .map_err(csv_err)?;
    w.flush()?;
    Ok(())
}
