//! Per-slot covert and secrecy rates and the average covert-and-secure rate.

use crate::channel::GainSet;
use crate::error::Result;
use crate::mc;
use crate::scenario::{PhasePlan, PowerSchedule, Scenario, Trajectory};

/// Phase-1 covert rate lower bound (S->R with residual self-interference).
pub fn r1_sec_slot(p_src: f64, g_sr: f64, p_jam_eff: f64, sic: f64, noise: f64, bandwidth: f64) -> f64 {
    bandwidth * (p_src * g_sr / (p_jam_eff * sic + noise)).ln_1p() / std::f64::consts::LN_2
}

/// Phase-2 secrecy rate lower bound, unclamped (may be negative).
pub fn r2_sec_slot(p_relay: f64, g_rd: f64, g_re_wc: f64, noise: f64, bandwidth: f64) -> f64 {
    let rd = (p_relay * g_rd / noise).ln_1p();
    let re = (p_relay * g_re_wc / noise).ln_1p();
    bandwidth * (rd - re) / std::f64::consts::LN_2
}

/// `min(phi1 * sum r1, phi2 * sum max(r2, 0))`.
pub fn acsr_lower_bound(r1: &[f64], r2: &[f64], plan: &PhasePlan) -> f64 {
    let (s1, s2) = phase_sums(r1, r2, plan, true);
    s1.min(s2)
}

/// Same as [`acsr_lower_bound`] without the per-slot clamp, as used inside
/// the optimizer.
pub fn acsr_unclamped(r1: &[f64], r2: &[f64], plan: &PhasePlan) -> f64 {
    let (s1, s2) = phase_sums(r1, r2, plan, false);
    s1.min(s2)
}

/// Weighted phase sums `(phi1 * sum r1, phi2 * sum r2)`.
pub fn phase_sums(r1: &[f64], r2: &[f64], plan: &PhasePlan, clamp: bool) -> (f64, f64) {
    let s1: f64 = r1.iter().sum();
    let s2: f64 = if clamp {
        r2.iter().map(|r| r.max(0.0)).sum()
    } else {
        r2.iter().sum()
    };
    (plan.phi1 * s1, plan.phi2 * s2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateBreakdown {
    pub r1_per_slot: Vec<f64>,
    pub rd_per_slot: Vec<f64>,
    /// Eavesdropper rate upper bound from the worst-case R->E gain.
    pub re_ub_per_slot: Vec<f64>,
    /// `rd - re_ub`, unclamped.
    pub r2_per_slot: Vec<f64>,
    pub acsr_lb: f64,
}

pub fn rate_breakdown(
    traj: &Trajectory,
    powers: &PowerSchedule,
    scn: &Scenario,
    plan: &PhasePlan,
) -> Result<RateBreakdown> {
    let g = GainSet::compute(traj, scn)?;
    Ok(rate_breakdown_with_gains(&g, powers, scn, plan))
}

pub fn rate_breakdown_with_gains(
    g: &GainSet,
    powers: &PowerSchedule,
    scn: &Scenario,
    plan: &PhasePlan,
) -> RateBreakdown {
    let b = scn.bandwidth;
    let pj = scn.jam_power_effective();
    let r1: Vec<f64> = powers
        .p_src
        .iter()
        .zip(&g.g_sr)
        .map(|(&p, &gsr)| r1_sec_slot(p, gsr, pj, scn.sic_level, scn.noise, b))
        .collect();
    let log2_1p = |x: f64| b * x.ln_1p() / std::f64::consts::LN_2;
    let rd: Vec<f64> = powers
        .p_relay
        .iter()
        .zip(&g.g_rd)
        .map(|(&p, &gg)| log2_1p(p * gg / scn.noise))
        .collect();
    let re: Vec<f64> = powers
        .p_relay
        .iter()
        .zip(&g.g_re_wc)
        .map(|(&p, &gg)| log2_1p(p * gg / scn.noise))
        .collect();
    let r2: Vec<f64> = powers
        .p_relay
        .iter()
        .zip(g.g_rd.iter().zip(&g.g_re_wc))
        .map(|(&p, (&grd, &gre))| r2_sec_slot(p, grd, gre, scn.noise, b))
        .collect();
    let acsr_lb = acsr_lower_bound(&r1, &r2, plan);
    RateBreakdown { r1_per_slot: r1, rd_per_slot: rd, re_ub_per_slot: re, r2_per_slot: r2, acsr_lb }
}

/// Monte-Carlo mean of the phase-1 rate with random residual self-interference
/// `|h|^2 ~ Exp(mean sic)` and jamming power `P ~ U(0, p_jam_max)`.
///
/// Returns `(estimate, standard error)`. With `sic == 0` or `p_jam_max == 0`
/// the rate is deterministic and is returned exactly.
#[allow(clippy::too_many_arguments)]
pub fn mc_r1_exact(
    p_src: f64,
    g_sr: f64,
    p_jam_max: f64,
    sic: f64,
    noise: f64,
    bandwidth: f64,
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    assert!(samples >= 1, "samples must be >= 1");
    if sic == 0.0 || p_jam_max == 0.0 {
        return (r1_sec_slot(p_src, g_sr, p_jam_max, sic, noise, bandwidth), 0.0);
    }
    let s = p_src * g_sr;
    let parts = mc::map_chunks(samples, seed, |rng, n| {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let h2 = sic * mc::exp1(rng);
            let p = p_jam_max * mc::uniform(rng);
            let r = bandwidth * (s / (p * h2 + noise)).ln_1p() / std::f64::consts::LN_2;
            sum += r;
            sum_sq += r * r;
        }
        (sum, sum_sq)
    });
    let (sum, sum_sq) = parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    mc::mean_se(sum, sum_sq, samples)
}
