//! Planning for a full-duplex UAV relay that must keep a source's transmission
//! covert from a warden while keeping the relayed data secret from an
//! eavesdropper.
//!
//! The relay splits a flight period into a receive-and-jam phase and a
//! secure-forwarding phase. This crate models the channels, the warden's
//! radiometer, the achievable rates and the rotary-wing propulsion energy, and
//! maximizes the covert-and-secure energy efficiency (bits per joule) by
//! alternating over:
//!
//! - the phase-switching factor (closed-form KKT case analysis, [`pdsa`]),
//! - the transmit powers (successive convex approximation, [`sca`]),
//! - the relay trajectory (successive convex approximation, [`sca`]),
//!
//! wrapped in a Dinkelbach-style ratio update ([`ao`]).
//!
//! Every convex subproblem is expressed as a [`convex::ConvexProgram`] and
//! solved by the log-barrier interior-point method in [`convex`], whose KKT
//! residuals can be re-checked independently with [`convex::check_kkt`].

// `!(x > 0.0)` style checks are intentional: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ao;
pub mod channel;
pub mod convex;
pub mod covert;
pub mod energy;
pub mod error;
pub mod experiment;
pub mod mc;
pub mod pdsa;
pub mod rate;
pub mod sca;
pub mod scenario;

pub use error::{Error, Result};
pub use scenario::{
    PhasePlan, PowerSchedule, RotorParams, Scenario, Solution, Trajectory, Vec2,
};
