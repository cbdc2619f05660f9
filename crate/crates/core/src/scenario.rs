//! Scenario parameters, phase timing, and the plain data types shared by every
//! other module (trajectory, power schedule, solution).

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel;
use crate::error::{Error, Result};

/// Minimum leg length in meters. Keeps the `1/speed` induced-power term of the
/// propulsion surrogate finite.
pub const D_MIN: f64 = 1e-3;

/// Relative tolerance on `delta1*n1 + delta2*n2 == period`.
pub const PHASE_SUM_RTOL: f64 = 1e-9;

/// Horizontal position in meters. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// Rotary-wing propulsion constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotorParams {
    /// Blade profile power in hover, W.
    pub p0: f64,
    /// Induced power in hover, W.
    pub p1: f64,
    /// Rotor blade tip speed, m/s.
    pub u_tip: f64,
    /// Mean rotor induced velocity in hover, m/s.
    pub v0: f64,
    /// Fuselage drag ratio.
    pub d0: f64,
    /// Air density, kg/m^3.
    pub rho_air: f64,
    pub rotor_solidity: f64,
    /// Rotor disc area, m^2.
    pub disc_area: f64,
}

impl Default for RotorParams {
    /// Commonly used rotary-wing constants (configuration, not measured data).
    fn default() -> Self {
        Self {
            p0: 79.8563,
            p1: 88.6279,
            u_tip: 120.0,
            v0: 4.03,
            d0: 0.6,
            rho_air: 1.225,
            rotor_solidity: 0.05,
            disc_area: 0.503,
        }
    }
}

impl RotorParams {
    /// Coefficient of `speed^3` in the parasite term.
    pub fn parasite_coeff(&self) -> f64 {
        0.5 * self.d0 * self.rho_air * self.rotor_solidity * self.disc_area
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("p0", self.p0),
            ("p1", self.p1),
            ("u_tip", self.u_tip),
            ("v0", self.v0),
            ("d0", self.d0),
            ("rho_air", self.rho_air),
            ("rotor_solidity", self.rotor_solidity),
            ("disc_area", self.disc_area),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!(
                    "rotor.{name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Which jamming power stands in for the random jamming level inside the
/// deterministic phase-1 rate bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JamPowerInRate {
    /// Use the peak jamming power (conservative).
    #[default]
    Max,
    /// Use the mean of the uniform jamming distribution.
    Mean,
}

/// Every physical and protocol parameter of one planning problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub q_src: Vec2,
    pub q_dst: Vec2,
    pub q_warden_est: Vec2,
    pub q_eaves_est: Vec2,
    pub r_warden: f64,
    pub r_eaves: f64,
    pub q_start: Vec2,
    pub q_end: Vec2,
    pub altitude: f64,
    pub period: f64,
    pub n1: usize,
    pub n2: usize,
    pub p_src_max: f64,
    pub p_relay_max: f64,
    pub p_jam_max: f64,
    pub noise: f64,
    pub beta0: f64,
    pub eta: f64,
    pub sic_level: f64,
    pub bandwidth: f64,
    pub epsilon_covert: f64,
    pub v_max: f64,
    pub conv_tol: f64,
    pub solver_tol: f64,
    pub jam_power_in_rate: JamPowerInRate,
    pub rotor: RotorParams,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    q_src: Vec2,
    q_dst: Vec2,
    q_warden_est: Vec2,
    q_eaves_est: Vec2,
    r_warden: f64,
    r_eaves: f64,
    q_start: Vec2,
    q_end: Vec2,
    altitude: f64,
    period: f64,
    n1: usize,
    n2: usize,
    p_src_max: f64,
    p_relay_max: f64,
    p_jam_max: f64,
    noise: Option<f64>,
    noise_db: Option<f64>,
    beta0: Option<f64>,
    beta0_db: Option<f64>,
    eta: f64,
    sic_level: f64,
    bandwidth: Option<f64>,
    epsilon_covert: f64,
    v_max: f64,
    conv_tol: Option<f64>,
    solver_tol: Option<f64>,
    #[serde(default)]
    jam_power_in_rate: JamPowerInRate,
    rotor: RotorParams,
}

/// Converts a power ratio in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    // Integral powers of ten are produced exactly (-120 dB -> 1e-12).
    let tenths = db / 10.0;
    if tenths.fract() == 0.0 && tenths.abs() < 300.0 {
        let k = tenths as i32;
        if k >= 0 {
            10f64.powi(k)
        } else {
            1.0 / 10f64.powi(-k)
        }
    } else {
        10f64.powf(tenths)
    }
}

fn pick_linear(name: &str, linear: Option<f64>, db: Option<f64>) -> Result<f64> {
    match (linear, db) {
        (Some(v), None) => Ok(v),
        (None, Some(d)) => Ok(db_to_linear(d)),
        (Some(_), Some(_)) => Err(Error::Parse(format!(
            "both {name} and {name}_db are given; use one"
        ))),
        (None, None) => Err(Error::Parse(format!("missing field `{name}` (or `{name}_db`)"))),
    }
}

/// Parses and validates a scenario document (TOML).
pub fn load_scenario(source: &str) -> Result<Scenario> {
    let doc: ScenarioDoc = toml::from_str(source).map_err(|e| Error::Parse(e.to_string()))?;
    let scn = Scenario {
        q_src: doc.q_src,
        q_dst: doc.q_dst,
        q_warden_est: doc.q_warden_est,
        q_eaves_est: doc.q_eaves_est,
        r_warden: doc.r_warden,
        r_eaves: doc.r_eaves,
        q_start: doc.q_start,
        q_end: doc.q_end,
        altitude: doc.altitude,
        period: doc.period,
        n1: doc.n1,
        n2: doc.n2,
        p_src_max: doc.p_src_max,
        p_relay_max: doc.p_relay_max,
        p_jam_max: doc.p_jam_max,
        noise: pick_linear("noise", doc.noise, doc.noise_db)?,
        beta0: pick_linear("beta0", doc.beta0, doc.beta0_db)?,
        eta: doc.eta,
        sic_level: doc.sic_level,
        bandwidth: doc.bandwidth.unwrap_or(1.0),
        epsilon_covert: doc.epsilon_covert,
        v_max: doc.v_max,
        conv_tol: doc.conv_tol.unwrap_or(0.01),
        solver_tol: doc.solver_tol.unwrap_or(1e-9),
        jam_power_in_rate: doc.jam_power_in_rate,
        rotor: doc.rotor,
    };
    scn.validate()?;
    Ok(scn)
}

/// Reads a scenario file from disk.
pub fn load_scenario_file(path: impl AsRef<Path>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    load_scenario(&text)
}

impl Scenario {
    /// The reference parameter set: a 700 m corridor with source, destination,
    /// warden and eavesdropper, 1 W power limits, -120 dB noise, -30 dB
    /// reference gain and 50 + 50 slots over a 50 s period. The SIC level and
    /// rotor constants are configuration choices.
    pub fn reference() -> Self {
        Self {
            q_src: Vec2::new(200.0, 500.0),
            q_dst: Vec2::new(500.0, 200.0),
            q_warden_est: Vec2::new(350.0, 450.0),
            q_eaves_est: Vec2::new(350.0, 200.0),
            r_warden: 15.0,
            r_eaves: 15.0,
            q_start: Vec2::new(0.0, 350.0),
            q_end: Vec2::new(700.0, 350.0),
            altitude: 75.0,
            period: 50.0,
            n1: 50,
            n2: 50,
            p_src_max: 1.0,
            p_relay_max: 1.0,
            p_jam_max: 1.0,
            noise: db_to_linear(-120.0),
            beta0: db_to_linear(-30.0),
            eta: 2.1,
            sic_level: db_to_linear(-110.0),
            bandwidth: 1.0,
            epsilon_covert: 0.01,
            v_max: 50.0,
            conv_tol: 0.01,
            solver_tol: 1e-9,
            jam_power_in_rate: JamPowerInRate::Max,
            rotor: RotorParams::default(),
        }
    }

    /// The reference parameters at reduced size (20 + 20 slots, 50 s).
    pub fn desk() -> Self {
        Self { n1: 20, n2: 20, ..Self::reference() }
    }

    pub fn n_total(&self) -> usize {
        self.n1 + self.n2
    }

    /// Serializes to the same document format [`load_scenario`] reads, with
    /// every quantity in linear units.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let v = |msg: String| Err(Error::Validation(msg));
        for (name, p) in [
            ("q_src", self.q_src),
            ("q_dst", self.q_dst),
            ("q_warden_est", self.q_warden_est),
            ("q_eaves_est", self.q_eaves_est),
            ("q_start", self.q_start),
            ("q_end", self.q_end),
        ] {
            if !p.is_finite() {
                return v(format!("{name} must be finite"));
            }
        }
        if self.n1 < 1 || self.n2 < 1 {
            return v(format!("n1 and n2 must be >= 1 (got {}, {})", self.n1, self.n2));
        }
        let positive = [
            ("altitude", self.altitude),
            ("period", self.period),
            ("noise", self.noise),
            ("beta0", self.beta0),
            ("eta", self.eta),
            ("bandwidth", self.bandwidth),
            ("v_max", self.v_max),
            ("conv_tol", self.conv_tol),
            ("solver_tol", self.solver_tol),
        ];
        for (name, x) in positive {
            if !(x.is_finite() && x > 0.0) {
                return v(format!("{name} must be finite and > 0, got {x}"));
            }
        }
        let non_negative = [
            ("r_warden", self.r_warden),
            ("r_eaves", self.r_eaves),
            ("p_src_max", self.p_src_max),
            ("p_relay_max", self.p_relay_max),
            ("p_jam_max", self.p_jam_max),
            ("sic_level", self.sic_level),
        ];
        for (name, x) in non_negative {
            if !(x.is_finite() && x >= 0.0) {
                return v(format!("{name} must be finite and >= 0, got {x}"));
            }
        }
        if !(self.epsilon_covert > 0.0 && self.epsilon_covert < 1.0) {
            return v(format!(
                "epsilon_covert must lie in (0, 1), got {}",
                self.epsilon_covert
            ));
        }
        self.rotor.validate()?;
        if self.q_src.dist(self.q_warden_est) <= self.r_warden {
            return v(format!(
                "warden ball contains source: |q_src - q_warden_est| = {} <= r_warden = {}",
                self.q_src.dist(self.q_warden_est),
                self.r_warden
            ));
        }
        Ok(())
    }

    /// Jamming power used inside the deterministic phase-1 rate bound.
    pub fn jam_power_effective(&self) -> f64 {
        match self.jam_power_in_rate {
            JamPowerInRate::Max => self.p_jam_max,
            JamPowerInRate::Mean => 0.5 * self.p_jam_max,
        }
    }
}

/// Slot durations and rate weights for a given phase-switching factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePlan {
    pub alpha: f64,
    /// Phase-1 slot duration, s.
    pub delta1: f64,
    /// Phase-2 slot duration, s.
    pub delta2: f64,
    pub phi1: f64,
    pub phi2: f64,
}

impl PhasePlan {
    pub fn new(scn: &Scenario, alpha: f64) -> Result<Self> {
        phase_plan(scn, alpha)
    }

    /// Slot duration of slot `n` (1-based, `1..=n1` is phase 1).
    pub fn delta_for_slot(&self, n1: usize, n: usize) -> f64 {
        if n <= n1 {
            self.delta1
        } else {
            self.delta2
        }
    }
}

pub fn phase_plan(scn: &Scenario, alpha: f64) -> Result<PhasePlan> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let n1 = scn.n1 as f64;
    let n2 = scn.n2 as f64;
    Ok(PhasePlan {
        alpha,
        delta1: alpha * scn.period / n1,
        delta2: (1.0 - alpha) * scn.period / n2,
        phi1: alpha / n1,
        phi2: (1.0 - alpha) / n2,
    })
}

/// Relay waypoints `0..=N`; `waypoints[0]` is the take-off point and slot `n`
/// (1-based) is served from `waypoints[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub waypoints: Vec<Vec2>,
}

impl Trajectory {
    pub fn new(waypoints: Vec<Vec2>) -> Self {
        Self { waypoints }
    }

    /// `n` equal legs from `start` to `end`.
    pub fn straight_line(start: Vec2, end: Vec2, n: usize) -> Self {
        let waypoints = (0..=n)
            .map(|k| {
                let s = k as f64 / n as f64;
                start + (end - start) * s
            })
            .collect();
        Self { waypoints }
    }

    /// Number of slots (legs).
    pub fn num_slots(&self) -> usize {
        self.waypoints.len().saturating_sub(1)
    }

    /// Position used by slot `n` (1-based).
    pub fn slot(&self, n: usize) -> Vec2 {
        self.waypoints[n]
    }

    /// Leg lengths `d(n) = |w[n] - w[n-1]|`, indexed `0..N` for slots `1..=N`.
    pub fn legs(&self) -> Vec<f64> {
        self.waypoints.windows(2).map(|w| w[1].dist(w[0])).collect()
    }
}

/// Per-slot transmit powers: source in phase 1, relay in phase 2.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSchedule {
    pub p_src: Vec<f64>,
    pub p_relay: Vec<f64>,
}

/// An optimized (or initial) plan together with its figures of merit.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub trajectory: Trajectory,
    pub powers: PowerSchedule,
    pub alpha: f64,
    /// Energy efficiency `acsr_lb * period / energy`, bits/J (per Hz).
    pub csee: f64,
    /// Lower bound on the average covert-and-secure rate, bits/s.
    pub acsr_lb: f64,
    /// Propulsion energy over the period, J.
    pub energy: f64,
    pub iterations: usize,
    pub phi_history: Vec<f64>,
}

/// Worst signed slack of one constraint family; negative means violated.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSlack {
    pub label: &'static str,
    pub description: &'static str,
    pub worst_slack: f64,
    /// Slot (1-based) attaining the worst slack, if per-slot.
    pub worst_slot: Option<usize>,
    /// Number of entries with slack below `-VIOLATION_TOL`.
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub entries: Vec<ConstraintSlack>,
}

const VIOLATION_TOL: f64 = 1e-9;

impl ValidationReport {
    pub fn get(&self, label: &str) -> Option<&ConstraintSlack> {
        self.entries.iter().find(|e| e.label == label)
    }

    pub fn worst_slack(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.worst_slack)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_feasible(&self, tol: f64) -> bool {
        self.worst_slack() >= -tol
    }
}

struct SlackAcc {
    worst: f64,
    slot: Option<usize>,
    violations: usize,
}

impl SlackAcc {
    fn new() -> Self {
        Self { worst: f64::INFINITY, slot: None, violations: 0 }
    }

    fn push(&mut self, slot: usize, slack: f64) {
        let slack = if slack.is_nan() { f64::NEG_INFINITY } else { slack };
        if slack < self.worst {
            self.worst = slack;
            self.slot = Some(slot);
        }
        if slack < -VIOLATION_TOL {
            self.violations += 1;
        }
    }

    fn finish(self, label: &'static str, description: &'static str) -> ConstraintSlack {
        ConstraintSlack {
            label,
            description,
            worst_slack: if self.worst.is_finite() || self.slot.is_some() {
                self.worst
            } else {
                0.0
            },
            worst_slot: self.slot,
            violations: self.violations,
        }
    }
}

/// Checks every constraint of the planning problem and reports signed slacks.
///
/// Covert slack is `cap(n) - p_src(n)` in watts, where the cap uses the
/// worst-case gains over the uncertainty discs. Speed slack is in meters
/// (`delta * v_max - d(n)`).
pub fn validate_solution(scn: &Scenario, sol: &Solution) -> ValidationReport {
    let n1 = scn.n1;
    let n = scn.n_total();
    let traj = &sol.trajectory;

    let mut covert = SlackAcc::new();
    let mut src_box = SlackAcc::new();
    let mut relay_box = SlackAcc::new();
    let mut endpoints = SlackAcc::new();
    let mut speed1 = SlackAcc::new();
    let mut speed2 = SlackAcc::new();
    let mut alpha_acc = SlackAcc::new();

    let shape_ok = traj.waypoints.len() == n + 1
        && sol.powers.p_src.len() == n1
        && sol.powers.p_relay.len() == scn.n2;
    if !shape_ok {
        let mut bad = SlackAcc::new();
        bad.push(0, f64::NEG_INFINITY);
        return ValidationReport { entries: vec![bad.finish("shape", "array sizes match n1, n2")] };
    }

    let g_sw = channel::worst_case_sw_gain(scn).unwrap_or(f64::INFINITY);
    for (i, &p) in sol.powers.p_src.iter().enumerate() {
        let slot = i + 1;
        let g_rw = channel::worst_case_rw_gain(traj.slot(slot), scn);
        let cap = scn.epsilon_covert * scn.p_jam_max * g_rw / g_sw;
        covert.push(slot, cap - p);
        src_box.push(slot, (scn.p_src_max - p).min(p));
    }
    for (i, &p) in sol.powers.p_relay.iter().enumerate() {
        relay_box.push(n1 + i + 1, (scn.p_relay_max - p).min(p));
    }
    endpoints.push(0, -traj.waypoints[0].dist(scn.q_start));
    endpoints.push(n, -traj.waypoints[n].dist(scn.q_end));

    alpha_acc.push(0, sol.alpha.min(1.0 - sol.alpha));
    let plan = phase_plan(scn, sol.alpha.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON)).ok();
    if let Some(plan) = plan {
        for (i, d) in traj.legs().into_iter().enumerate() {
            let slot = i + 1;
            if slot <= n1 {
                speed1.push(slot, plan.delta1 * scn.v_max - d);
            } else {
                speed2.push(slot, plan.delta2 * scn.v_max - d);
            }
        }
    }

    ValidationReport {
        entries: vec![
            covert.finish("covert_cap", "robust covert power cap (watts)"),
            src_box.finish("p_src_box", "source power within [0, p_src_max]"),
            relay_box.finish("p_relay_box", "relay power within [0, p_relay_max]"),
            endpoints.finish("endpoints", "take-off and landing positions"),
            speed1.finish("speed_phase1", "phase-1 leg length within delta1 * v_max"),
            speed2.finish("speed_phase2", "phase-2 leg length within delta2 * v_max"),
            alpha_acc.finish("alpha_range", "alpha in (0, 1)"),
        ],
    }
}
