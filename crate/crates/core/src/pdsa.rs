//! Phase-switching factor subproblem: with powers and trajectory fixed,
//! maximize `min(a rho1, (1 - a) rho2) - phi E(a)` over `a in [beta1, 1 - beta2]`
//! by a closed-form KKT case analysis, with a dense grid search as reference.

use crate::channel::GainSet;
use crate::energy::{alpha_energy_coeffs, AlphaEnergyCoeffs};
use crate::error::{Error, Result};
use crate::rate;
use crate::scenario::{phase_plan, PowerSchedule, Scenario, Trajectory};

pub const ALPHA_LO: f64 = 1e-6;
pub const ALPHA_HI: f64 = 1.0 - 1e-6;
pub const BISECTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdsaCoefficients {
    /// Mean phase-1 slot rate.
    pub rho1: f64,
    /// Mean phase-2 slot rate (unclamped).
    pub rho2: f64,
    /// Smallest `alpha` meeting the phase-1 speed limits.
    pub beta1: f64,
    /// Smallest `1 - alpha` meeting the phase-2 speed limits.
    pub beta2: f64,
    /// Root of `-phi E'(a) + rho1`.
    pub alpha_hat1: f64,
    /// Kink `a rho1 = (1 - a) rho2`.
    pub alpha_hat2: f64,
    /// Root of `-phi E'(a) - rho2`.
    pub alpha_hat3: f64,
}

/// Branch of the decision tree that produced the answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdsaCase {
    /// Interior root of the phase-1-limited objective.
    Hat1,
    /// Kink between the two rate limits.
    Hat2,
    /// Interior root of the phase-2-limited objective.
    Hat3,
    /// Lower bound `beta1`.
    LowerBound,
    /// `hat1 <= beta1`.
    MirrorLowerBound,
    /// `(1 - beta2) rho1 <= beta2 rho2`.
    MirrorUpperBound,
    MirrorHat2,
    MirrorHat3,
    MirrorLowerBoundHat3,
    /// `hat3` clipped to the upper bound.
    MirrorUpperClip,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdsaDiagnostics {
    pub case_taken: PdsaCase,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub stationarity_residual: f64,
    pub complementarity_residual: f64,
}

/// Bisection for the root of a decreasing function on `(ALPHA_LO, ALPHA_HI)`.
fn bisect_decreasing(f: impl Fn(f64) -> f64, what: &str) -> Result<f64> {
    let (mut lo, mut hi) = (ALPHA_LO, ALPHA_HI);
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo >= 0.0 && fhi <= 0.0) {
        return Err(Error::Bracket(format!(
            "{what}: f({lo}) = {flo}, f({hi}) = {fhi}"
        )));
    }
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `alpha_hat1` and `alpha_hat3`. With `phi <= 0` the energy term vanishes and
/// the roots saturate at 1 and 0.
pub fn alpha_roots(energy: &AlphaEnergyCoeffs, rho1: f64, rho2: f64, phi: f64) -> Result<(f64, f64)> {
    if phi <= 0.0 {
        return Ok((1.0, 0.0));
    }
    let h1 = bisect_decreasing(|a| -phi * energy.derivative(a) + rho1, "alpha_hat1")?;
    let h3 = bisect_decreasing(|a| -phi * energy.derivative(a) - rho2, "alpha_hat3")?;
    Ok((h1, h3))
}

pub fn alpha_hat2(rho1: f64, rho2: f64) -> f64 {
    let s = rho1 + rho2;
    if s == 0.0 {
        0.0
    } else {
        rho2 / s
    }
}

/// Speed-limit margins `beta_k = N_k max_n d(n) / (T v_max)`.
pub fn beta_margins(legs: &[f64], scn: &Scenario) -> (f64, f64) {
    let (p1, p2) = legs.split_at(scn.n1);
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let denom = scn.period * scn.v_max;
    (scn.n1 as f64 * max(p1) / denom, scn.n2 as f64 * max(p2) / denom)
}

/// Mean phase rates `(rho1, rho2)`; independent of `alpha`.
pub fn mean_rates(traj: &Trajectory, powers: &PowerSchedule, scn: &Scenario) -> Result<(f64, f64)> {
    let g = GainSet::compute(traj, scn)?;
    // alpha does not enter the per-slot rates
    let plan = phase_plan(scn, 0.5)?;
    let b = rate::rate_breakdown_with_gains(&g, powers, scn, &plan);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok((mean(&b.r1_per_slot), mean(&b.r2_per_slot)))
}

pub fn pdsa_coeffs(
    traj: &Trajectory,
    powers: &PowerSchedule,
    scn: &Scenario,
    phi_l: f64,
) -> Result<(PdsaCoefficients, AlphaEnergyCoeffs)> {
    let legs = traj.legs();
    let energy = alpha_energy_coeffs(&legs, scn)?;
    let (rho1, rho2) = mean_rates(traj, powers, scn)?;
    let (beta1, beta2) = beta_margins(&legs, scn);
    let (alpha_hat1, alpha_hat3) = alpha_roots(&energy, rho1, rho2, phi_l)?;
    Ok((
        PdsaCoefficients {
            rho1,
            rho2,
            beta1,
            beta2,
            alpha_hat1,
            alpha_hat2: alpha_hat2(rho1, rho2),
            alpha_hat3,
        },
        energy,
    ))
}

/// Objective `min(a rho1, (1 - a) rho2) - phi E(a)`.
pub fn alpha_objective(c: &PdsaCoefficients, energy: &AlphaEnergyCoeffs, phi: f64, alpha: f64) -> f64 {
    (alpha * c.rho1).min((1.0 - alpha) * c.rho2) - phi * energy.energy(alpha)
}

/// Decision tree over the candidate points.
pub fn pdsa_alpha(
    c: &PdsaCoefficients,
    energy: &AlphaEnergyCoeffs,
    phi_l: f64,
) -> Result<(f64, PdsaDiagnostics)> {
    let (b1, b2) = (c.beta1, c.beta2);
    if b1 + b2 >= 1.0 {
        return Err(Error::InfeasibleInterval(b1 + b2));
    }
    let (h1, h2, h3) = (c.alpha_hat1, c.alpha_hat2, c.alpha_hat3);
    let upper = 1.0 - b2;
    let (alpha, case) = if h1 > b1 && h1 < upper {
        if h1 * c.rho1 <= (1.0 - h1) * c.rho2 {
            (h1, PdsaCase::Hat1)
        } else if h2 > b1 && h2 < h1 {
            if h2 >= h3 {
                (h2, PdsaCase::Hat2)
            } else {
                (h3, PdsaCase::Hat3)
            }
        } else if b1 >= h3 {
            (b1, PdsaCase::LowerBound)
        } else {
            (h3, PdsaCase::Hat3)
        }
    } else if h1 <= b1 {
        (b1, PdsaCase::MirrorLowerBound)
    } else if upper * c.rho1 <= b2 * c.rho2 {
        (upper, PdsaCase::MirrorUpperBound)
    } else if h2 >= b1 && h2 < upper {
        // hat3 may exceed the upper bound here since only hat1 >= 1 - beta2
        // is known; clip it.
        if h2 >= h3 {
            (h2, PdsaCase::MirrorHat2)
        } else if h3 <= upper {
            (h3, PdsaCase::MirrorHat3)
        } else {
            (upper, PdsaCase::MirrorUpperClip)
        }
    } else if b1 >= h3 {
        (b1, PdsaCase::MirrorLowerBoundHat3)
    } else if h3 <= upper {
        (h3, PdsaCase::MirrorHat3)
    } else {
        (upper, PdsaCase::MirrorUpperClip)
    };
    let diag = kkt_multipliers(c, energy, phi_l, alpha, case);
    Ok((alpha, diag))
}

/// Reconstructs multipliers of the slack form
/// `max w - phi E(a)` s.t. `w <= a rho1`, `w <= (1 - a) rho2`, `a >= beta1`,
/// `a <= 1 - beta2`, choosing them to minimize the stationarity residual
/// `-phi E'(a) + l1 rho1 - l2 rho2 + l3 - l4` under `l1 + l2 = 1` and
/// complementary slackness.
pub fn kkt_multipliers(
    c: &PdsaCoefficients,
    energy: &AlphaEnergyCoeffs,
    phi: f64,
    alpha: f64,
    case: PdsaCase,
) -> PdsaDiagnostics {
    let scale = 1.0 + c.rho1.abs() + c.rho2.abs();
    let g1 = alpha * c.rho1;
    let g2 = (1.0 - alpha) * c.rho2;
    let w = g1.min(g2);
    let act_tol = 1e-9 * scale;
    let act1 = g1 - w <= act_tol;
    let act2 = g2 - w <= act_tol;
    let at_lower = (alpha - c.beta1).abs() <= 1e-12;
    let at_upper = (1.0 - c.beta2 - alpha).abs() <= 1e-12;

    let (l_lo, l_hi) = match (act1, act2) {
        (true, true) => (0.0, 1.0),
        (true, false) => (0.0, 0.0),
        _ => (1.0, 1.0),
    };
    let de = if phi == 0.0 { 0.0 } else { energy.derivative(alpha) };
    // stationarity: base - l2 (rho1 + rho2) + l3 - l4 = 0
    let base = -phi * de + c.rho1;
    let s = c.rho1 + c.rho2;
    let mut l2 = if s > 0.0 { (base / s).clamp(l_lo, l_hi) } else { l_lo };
    if s <= 0.0 && base < 0.0 {
        l2 = l_hi;
    }
    let mut rem = base - l2 * s;
    let (mut l3, mut l4) = (0.0, 0.0);
    if rem > 0.0 && at_upper {
        l4 = rem;
        rem = 0.0;
    } else if rem < 0.0 && at_lower {
        l3 = -rem;
        rem = 0.0;
    }
    let l1 = 1.0 - l2;
    let complementarity = (l1 * (g1 - w))
        .abs()
        .max((l2 * (g2 - w)).abs())
        .max((l3 * (alpha - c.beta1)).abs())
        .max((l4 * (1.0 - c.beta2 - alpha)).abs());
    PdsaDiagnostics {
        case_taken: case,
        lambda1: l1,
        lambda2: l2,
        lambda3: l3,
        lambda4: l4,
        stationarity_residual: rem.abs(),
        complementarity_residual: complementarity,
    }
}

/// Reference answer: best point of the grid `{beta1, beta1 + step, ...,
/// 1 - beta2}`; ties go to the smallest `alpha`.
pub fn alpha_grid_oracle(
    c: &PdsaCoefficients,
    energy: &AlphaEnergyCoeffs,
    phi_l: f64,
    step: f64,
) -> Result<f64> {
    let (b1, b2) = (c.beta1, c.beta2);
    if b1 + b2 >= 1.0 {
        return Err(Error::InfeasibleInterval(b1 + b2));
    }
    let lo = b1.max(ALPHA_LO);
    let hi = (1.0 - b2).min(ALPHA_HI);
    let count = ((hi - lo) / step).floor() as usize;
    let mut best = (lo, alpha_objective(c, energy, phi_l, lo));
    for k in 1..=count + 1 {
        let a = if k > count { hi } else { lo + k as f64 * step };
        if a > hi {
            continue;
        }
        let v = alpha_objective(c, energy, phi_l, a);
        if v > best.1 {
            best = (a, v);
        }
    }
    Ok(best.0)
}
