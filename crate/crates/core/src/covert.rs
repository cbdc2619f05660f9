//! The warden's radiometer: false-alarm, miss-detection and detection-error
//! probabilities as functions of the threshold, the optimal threshold, the
//! covert power constraint, and Monte-Carlo estimators of the same quantities.

use crate::error::{Error, Result};
use crate::mc;

/// Inputs of the warden's threshold test in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorEnv {
    pub p_src: f64,
    /// Mean S->W gain (or its worst-case bound).
    pub g_sw_mean: f64,
    /// R->W gain (or its worst-case bound).
    pub g_rw: f64,
    pub p_jam_max: f64,
    pub noise: f64,
}

/// Threshold breakpoints of the piecewise-linear error probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdBreakpoints {
    pub z1: f64,
    pub z2: f64,
    pub z3: f64,
}

impl DetectorEnv {
    /// Received jamming power span `P_max * g_rw`.
    fn jam_span(&self) -> f64 {
        self.p_jam_max * self.g_rw
    }

    /// Mean received source power `P_S * g_sw`.
    fn signal(&self) -> f64 {
        self.p_src * self.g_sw_mean
    }

    pub fn breakpoints(&self) -> ThresholdBreakpoints {
        let z1 = self.jam_span() + self.noise;
        let z2 = self.signal() + self.noise;
        ThresholdBreakpoints { z1, z2, z3: z1 + z2 - self.noise }
    }
}

pub fn false_alarm_prob(tau: f64, env: &DetectorEnv) -> f64 {
    let z = env.breakpoints();
    if tau < env.noise {
        1.0
    } else if tau < z.z1 {
        1.0 - (tau - env.noise) / env.jam_span()
    } else {
        0.0
    }
}

pub fn miss_detect_prob(tau: f64, env: &DetectorEnv) -> f64 {
    let z = env.breakpoints();
    if tau < z.z2 {
        0.0
    } else if tau < z.z3 {
        (tau - z.z2) / env.jam_span()
    } else {
        1.0
    }
}

/// Detection error probability `FAP + MDP`.
pub fn dep(tau: f64, env: &DetectorEnv) -> f64 {
    false_alarm_prob(tau, env) + miss_detect_prob(tau, env)
}

/// Minimum detection error probability and the half-open threshold interval
/// `[z2, z1)` attaining it.
pub fn min_dep(env: &DetectorEnv) -> Result<(f64, (f64, f64))> {
    let signal = env.signal();
    let jamming = env.jam_span();
    if signal >= jamming {
        return Err(Error::DegenerateDetection { signal, jamming });
    }
    let z = env.breakpoints();
    Ok((1.0 - signal / jamming, (z.z2, z.z1)))
}

/// Result of the covert power test: `ok` iff `slack >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovertCheck {
    pub ok: bool,
    /// `epsilon * p_jam_max * g_rw_wc - p_src * g_sw_wc`, in received watts.
    pub slack: f64,
}

pub fn covert_ok(p_src: f64, g_sw_wc: f64, g_rw_wc: f64, p_jam_max: f64, epsilon: f64) -> CovertCheck {
    let slack = epsilon * p_jam_max * g_rw_wc - p_src * g_sw_wc;
    CovertCheck { ok: slack >= 0.0, slack }
}

/// Largest source power satisfying the covert test.
pub fn covert_power_cap(g_sw_wc: f64, g_rw_wc: f64, p_jam_max: f64, epsilon: f64) -> f64 {
    epsilon * p_jam_max * g_rw_wc / g_sw_wc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CovertMcConfig {
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub se: f64,
}

#[derive(Default, Clone, Copy)]
struct Counts {
    false_alarm: u64,
    miss: u64,
}

fn mc_dep_impl(tau: f64, env: &DetectorEnv, cfg: CovertMcConfig, fading: bool) -> McEstimate {
    assert!(cfg.samples >= 1, "samples must be >= 1");
    let jam = env.jam_span();
    let signal = env.signal();
    let counts = mc::map_chunks(cfg.samples, cfg.seed, |rng, n| {
        let mut c = Counts::default();
        for _ in 0..n {
            // H0: jamming plus noise.
            let t0 = mc::uniform(rng) * jam + env.noise;
            if t0 > tau {
                c.false_alarm += 1;
            }
            // H1: independent jamming draw plus the source contribution.
            let s = if fading { signal * mc::exp1(rng) } else { signal };
            let t1 = mc::uniform(rng) * jam + s + env.noise;
            if t1 <= tau {
                c.miss += 1;
            }
        }
        c
    });
    let total = counts.iter().fold(Counts::default(), |a, c| Counts {
        false_alarm: a.false_alarm + c.false_alarm,
        miss: a.miss + c.miss,
    });
    let n = cfg.samples as f64;
    let p_fa = total.false_alarm as f64 / n;
    let p_md = total.miss as f64 / n;
    McEstimate {
        value: p_fa + p_md,
        se: (p_fa * (1.0 - p_fa) / n + p_md * (1.0 - p_md) / n).sqrt(),
    }
}

/// Monte-Carlo DEP with uniform jamming power draws. The source contribution
/// under H1 uses the mean S->W gain, the same statistic the closed forms
/// describe.
pub fn mc_dep(tau: f64, env: &DetectorEnv, cfg: CovertMcConfig) -> McEstimate {
    mc_dep_impl(tau, env, cfg, false)
}

/// Diagnostic variant that also draws the Rayleigh power `|zeta|^2 ~ Exp(1)`
/// per H1 trial. Its gap to [`dep`] measures the effect of averaging the
/// fading inside the statistic.
pub fn mc_dep_fading(tau: f64, env: &DetectorEnv, cfg: CovertMcConfig) -> McEstimate {
    mc_dep_impl(tau, env, cfg, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn env() -> DetectorEnv {
        DetectorEnv { p_src: 0.2, g_sw_mean: 1e-8, g_rw: 1e-7, p_jam_max: 1.0, noise: 1e-12 }
    }

    #[test]
    fn breakpoint_values() {
        let e = env();
        let z = e.breakpoints();
        assert_eq!(false_alarm_prob(e.noise, &e), 1.0);
        let mid = e.noise + 0.5 * e.p_jam_max * e.g_rw;
        assert!((false_alarm_prob(mid, &e) - 0.5).abs() < 1e-12);
        assert_eq!(miss_detect_prob(z.z2, &e), 0.0);
        assert_eq!(miss_detect_prob(z.z3, &e), 1.0);
        assert_eq!(dep(0.5 * e.noise, &e), 1.0);
        assert_eq!(dep(z.z3 * 1.01, &e), 1.0);
    }

    #[test]
    fn dep_constant_on_optimal_interval() {
        let e = env();
        let z = e.breakpoints();
        let expected = 1.0 - e.p_src * e.g_sw_mean / (e.p_jam_max * e.g_rw);
        for k in 0..10 {
            let tau = z.z2 + (z.z1 - z.z2) * k as f64 / 10.0;
            assert!((dep(tau, &e) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn min_dep_examples() {
        let mut e = env();
        e.p_src = 0.0;
        let (v, (lo, hi)) = min_dep(&e).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(lo, e.noise);
        assert_eq!(hi, e.breakpoints().z1);

        let mut e = env();
        e.p_src = 0.01 * e.p_jam_max * e.g_rw / e.g_sw_mean;
        let (v, _) = min_dep(&e).unwrap();
        assert!((v - 0.99).abs() < 1e-12);

        let mut e = env();
        e.p_src = 100.0;
        assert!(matches!(min_dep(&e), Err(Error::DegenerateDetection { .. })));
    }

    #[test]
    fn covert_ok_examples() {
        let (gsw, grw, pj, eps) = (2e-8, 1e-7, 1.0, 0.01);
        let c = covert_ok(0.0, gsw, grw, pj, eps);
        assert!(c.ok);
        assert_eq!(c.slack, eps * pj * grw);
        let cap = covert_power_cap(gsw, grw, pj, eps);
        let c = covert_ok(cap, gsw, grw, pj, eps);
        assert!(c.ok);
        assert!(c.slack.abs() < 1e-24);
        assert!(!covert_ok(cap + 1e-6, gsw, grw, pj, eps).ok);
    }

    #[test]
    fn mc_limits() {
        let e = env();
        let cfg = CovertMcConfig { samples: 10_000, seed: 5 };
        assert_eq!(mc_dep(1.0, &e, cfg).value, 1.0);
        assert_eq!(mc_dep(0.0, &e, cfg).value, 1.0);
    }

    #[test]
    fn mc_is_deterministic() {
        let e = env();
        let z = e.breakpoints();
        let cfg = CovertMcConfig { samples: 150_000, seed: 11 };
        let tau = 0.5 * (z.z1 + z.z2);
        assert_eq!(mc_dep(tau, &e, cfg), mc_dep(tau, &e, cfg));
    }

    #[test]
    fn fading_variant_differs_but_stays_close_in_the_plateau() {
        let e = env();
        let z = e.breakpoints();
        let cfg = CovertMcConfig { samples: 200_000, seed: 2 };
        let tau = 0.5 * (z.z1 + z.z2);
        let a = mc_dep(tau, &e, cfg).value;
        let b = mc_dep_fading(tau, &e, cfg).value;
        assert!((a - b).abs() < 0.05, "{a} {b}");
    }

    proptest! {
        #[test]
        fn probabilities_bounded_and_dep_shape(
            p_src in 0.0f64..1.0,
            g_sw in 1e-10f64..1e-7,
            g_rw in 1e-9f64..1e-6,
            u in -0.1f64..1.3,
        ) {
            let e = DetectorEnv { p_src, g_sw_mean: g_sw, g_rw, p_jam_max: 1.0, noise: 1e-12 };
            let z = e.breakpoints();
            let tau = u * z.z3;
            let fa = false_alarm_prob(tau, &e);
            let md = miss_detect_prob(tau, &e);
            prop_assert!((0.0..=1.0).contains(&fa));
            prop_assert!((0.0..=1.0).contains(&md));
            prop_assert!(dep(tau, &e) <= 2.0);
            prop_assert!(z.z3 >= z.z1.max(z.z2));
            if let Ok((v, _)) = min_dep(&e) {
                prop_assert!(dep(tau, &e) >= v - 1e-12);
            }
        }

        #[test]
        fn covert_feasibility_implies_detector_quality(
            frac in 0.0f64..1.0,
            g_sw in 1e-10f64..1e-7,
            g_rw in 1e-9f64..1e-6,
            eps in 0.001f64..0.5,
        ) {
            let p = frac * covert_power_cap(g_sw, g_rw, 1.0, eps);
            prop_assert!(covert_ok(p, g_sw, g_rw, 1.0, eps).ok);
            let e = DetectorEnv { p_src: p, g_sw_mean: g_sw, g_rw, p_jam_max: 1.0, noise: 1e-12 };
            let (v, _) = min_dep(&e).unwrap();
            prop_assert!(v >= 1.0 - eps - 1e-12);
        }
    }
}
