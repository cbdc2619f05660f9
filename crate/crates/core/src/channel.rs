//! Deterministic channel power gains and their robust bounds over the
//! uncertainty discs around the estimated warden and eavesdropper positions.

use crate::error::{Error, Result};
use crate::scenario::{Scenario, Trajectory, Vec2};

/// Line-of-sight air-to-ground gain `beta0 / (|q_uav - q_ground|^2 + H^2)`.
pub fn a2g_gain(q_uav: Vec2, q_ground: Vec2, altitude: f64, beta0: f64) -> f64 {
    beta0 / ((q_uav - q_ground).norm_sq() + altitude * altitude)
}

/// Mean Rayleigh ground-to-ground gain `beta0 / |q_a - q_b|^eta`.
pub fn g2g_mean_gain(q_a: Vec2, q_b: Vec2, beta0: f64, eta: f64) -> Result<f64> {
    let d = q_a.dist(q_b);
    if d <= 0.0 {
        return Err(Error::DegenerateGeometry(format!(
            "ground-to-ground distance is zero at {q_a}"
        )));
    }
    Ok(beta0 / d.powf(eta))
}

/// Largest mean S->W gain over the warden's uncertainty disc.
pub fn worst_case_sw_gain(scn: &Scenario) -> Result<f64> {
    let d = scn.q_src.dist(scn.q_warden_est);
    if d <= scn.r_warden {
        return Err(Error::Domain(format!(
            "source lies within the warden uncertainty disc (distance {d}, radius {})",
            scn.r_warden
        )));
    }
    Ok(scn.beta0 / (d - scn.r_warden).powf(scn.eta))
}

/// Smallest R->W gain over the warden's uncertainty disc.
pub fn worst_case_rw_gain(q_uav: Vec2, scn: &Scenario) -> f64 {
    let d = q_uav.dist(scn.q_warden_est) + scn.r_warden;
    scn.beta0 / (d * d + scn.altitude * scn.altitude)
}

/// Largest R->E gain over the eavesdropper's uncertainty disc.
pub fn worst_case_re_gain(q_uav: Vec2, scn: &Scenario) -> f64 {
    let d = (q_uav.dist(scn.q_eaves_est) - scn.r_eaves).max(0.0);
    scn.beta0 / (d * d + scn.altitude * scn.altitude)
}

/// Every gain needed to evaluate rates and the covert constraint along a
/// trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    /// S->R gain per phase-1 slot.
    pub g_sr: Vec<f64>,
    /// Worst-case R->W gain per phase-1 slot.
    pub g_rw_wc: Vec<f64>,
    /// R->D gain per phase-2 slot.
    pub g_rd: Vec<f64>,
    /// Worst-case R->E gain per phase-2 slot.
    pub g_re_wc: Vec<f64>,
    pub g_sw_mean: f64,
    pub g_sw_wc: f64,
}

impl GainSet {
    pub fn compute(traj: &Trajectory, scn: &Scenario) -> Result<Self> {
        let n1 = scn.n1;
        let n = scn.n_total();
        if traj.num_slots() != n {
            return Err(Error::Domain(format!(
                "trajectory has {} slots, scenario expects {n}",
                traj.num_slots()
            )));
        }
        let h = scn.altitude;
        let b = scn.beta0;
        let phase1 = (1..=n1).map(|k| traj.slot(k));
        let phase2 = (n1 + 1..=n).map(|k| traj.slot(k));
        Ok(Self {
            g_sr: phase1.clone().map(|q| a2g_gain(q, scn.q_src, h, b)).collect(),
            g_rw_wc: phase1.map(|q| worst_case_rw_gain(q, scn)).collect(),
            g_rd: phase2.clone().map(|q| a2g_gain(q, scn.q_dst, h, b)).collect(),
            g_re_wc: phase2.map(|q| worst_case_re_gain(q, scn)).collect(),
            g_sw_mean: g2g_mean_gain(scn.q_src, scn.q_warden_est, b, scn.eta)?,
            g_sw_wc: worst_case_sw_gain(scn)?,
        })
    }
}
