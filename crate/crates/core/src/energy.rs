//! Rotary-wing propulsion power, total flight energy and the efficiency ratio.

use crate::error::{Error, Result};
use crate::scenario::{PhasePlan, RotorParams, Scenario, Trajectory, D_MIN};

/// Rotary-wing propulsion power at level speed `speed` (blade profile,
/// induced and parasite terms).
pub fn propulsion_power_exact(speed: f64, rotor: &RotorParams) -> f64 {
    let v2 = speed * speed;
    let blade = rotor.p0 * (1.0 + 3.0 * v2 / (rotor.u_tip * rotor.u_tip));
    let r = v2 / (2.0 * rotor.v0 * rotor.v0);
    let induced = rotor.p1 * ((1.0 + r * r).sqrt() - r).sqrt();
    let parasite = rotor.parasite_coeff() * v2 * speed;
    blade + induced + parasite
}

/// High-speed surrogate in which the induced term becomes `p1 * v0 / speed`.
/// Never smaller than the exact power.
pub fn propulsion_power_approx(speed: f64, rotor: &RotorParams) -> Result<f64> {
    if !(speed > 0.0) {
        return Err(Error::Domain(format!("surrogate power needs speed > 0, got {speed}")));
    }
    let v2 = speed * speed;
    let blade = rotor.p0 * (1.0 + 3.0 * v2 / (rotor.u_tip * rotor.u_tip));
    Ok(blade + rotor.p1 * rotor.v0 / speed + rotor.parasite_coeff() * v2 * speed)
}

/// Surrogate energy of flying a leg of length `d` within `delta` seconds:
/// `delta * approx(d / delta)`, expanded so that each term is explicit.
pub fn leg_energy(d: f64, delta: f64, rotor: &RotorParams) -> f64 {
    let u2 = rotor.u_tip * rotor.u_tip;
    delta * rotor.p0
        + 3.0 * rotor.p0 * d * d / (u2 * delta)
        + rotor.p1 * rotor.v0 * delta * delta / d
        + rotor.parasite_coeff() * d * d * d / (delta * delta)
}

fn check_legs(d: &[f64]) -> Result<()> {
    for (i, &x) in d.iter().enumerate() {
        if !(x >= D_MIN) {
            return Err(Error::DegenerateLeg { index: i + 1, length: x, min: D_MIN });
        }
    }
    Ok(())
}

/// Total surrogate propulsion energy over the period.
pub fn e_sum(traj: &Trajectory, plan: &PhasePlan, scn: &Scenario) -> Result<f64> {
    let d = traj.legs();
    check_legs(&d)?;
    let (d1, d2) = d.split_at(scn.n1.min(d.len()));
    let e1: f64 = d1.iter().map(|&x| leg_energy(x, plan.delta1, &scn.rotor)).sum();
    let e2: f64 = d2.iter().map(|&x| leg_energy(x, plan.delta2, &scn.rotor)).sum();
    Ok(e1 + e2)
}

/// Coefficients of the total energy as a function of the phase split:
/// `E(a) = a1 a + b1/a + c1 a^2 + d1/a^2 + (same with 1 - a, phase 2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaEnergyCoeffs {
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub d1: f64,
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
    pub d2: f64,
}

fn phase_coeffs(d: &[f64], nk: f64, scn: &Scenario) -> (f64, f64, f64, f64) {
    let r = &scn.rotor;
    let t = scn.period;
    let sum_sq: f64 = d.iter().map(|x| x * x).sum();
    let sum_inv: f64 = d.iter().map(|x| 1.0 / x).sum();
    let sum_cube: f64 = d.iter().map(|x| x * x * x).sum();
    (
        r.p0 * t,
        3.0 * r.p0 * nk * sum_sq / (r.u_tip * r.u_tip * t),
        r.p1 * r.v0 * t * t * sum_inv / (nk * nk),
        r.parasite_coeff() * nk * nk * sum_cube / (t * t),
    )
}

/// Energy coefficients for the given leg lengths (slots `1..=N`).
pub fn alpha_energy_coeffs(distances: &[f64], scn: &Scenario) -> Result<AlphaEnergyCoeffs> {
    check_legs(distances)?;
    if distances.len() != scn.n_total() {
        return Err(Error::Domain(format!(
            "expected {} leg lengths, got {}",
            scn.n_total(),
            distances.len()
        )));
    }
    let (p1, p2) = distances.split_at(scn.n1);
    let (a1, b1, c1, d1) = phase_coeffs(p1, scn.n1 as f64, scn);
    let (a2, b2, c2, d2) = phase_coeffs(p2, scn.n2 as f64, scn);
    Ok(AlphaEnergyCoeffs { a1, b1, c1, d1, a2, b2, c2, d2 })
}

impl AlphaEnergyCoeffs {
    pub fn energy(&self, alpha: f64) -> f64 {
        let (a, b) = (alpha, 1.0 - alpha);
        self.a1 * a + self.b1 / a + self.c1 * a * a + self.d1 / (a * a)
            + self.a2 * b
            + self.b2 / b
            + self.c2 * b * b
            + self.d2 / (b * b)
    }

    /// `dE/dalpha`, without the domain check.
    pub fn derivative(&self, alpha: f64) -> f64 {
        let (a, b) = (alpha, 1.0 - alpha);
        self.a1 - self.b1 / (a * a) + 2.0 * self.c1 * a - 2.0 * self.d1 / (a * a * a) - self.a2
            + self.b2 / (b * b)
            - 2.0 * self.c2 * b
            + 2.0 * self.d2 / (b * b * b)
    }

    /// True when all reciprocal coefficients are positive, so the derivative
    /// runs from `-inf` to `+inf` over `(0, 1)`.
    pub fn has_poles(&self) -> bool {
        self.b1 > 0.0 && self.d1 > 0.0 && self.b2 > 0.0 && self.d2 > 0.0
    }
}

/// `dE/dalpha` of the coefficient form.
pub fn de_sum_dalpha(coeffs: &AlphaEnergyCoeffs, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(coeffs.derivative(alpha))
}

/// Efficiency in bits per joule: `acsr_lb * period / energy`.
pub fn csee(acsr_lb: f64, energy: f64, period: f64) -> Result<f64> {
    if !(energy > 0.0) {
        return Err(Error::Domain(format!("energy must be > 0, got {energy}")));
    }
    Ok(acsr_lb * period / energy)
}
