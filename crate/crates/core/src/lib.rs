//! Periodic solutions of `x' = h(x)` under the pulses `x -> (1 + lambda) x`
//! applied at `t = k omega`.
//!
//! `h` is a polynomial with `h(0) = 0`. Every `omega`-periodic solution is a
//! fixed point of the pulsed time map `x -> (1 + lambda) R_omega(x)`, where
//! `R_omega` is the time-`omega` map of the smooth flow. The crate evaluates
//! `R_omega` and its derivative numerically, finds and classifies the fixed
//! points, and locates the pulse strengths at which they appear, vanish or
//! exchange stability.
//!
//! ```
//! use stroboscope::{find_periodic_orbits, reference, Stability};
//!
//! let an = reference::cubic().analyzer().unwrap();
//! let orbits = find_periodic_orbits(&an, 0.0).unwrap();
//! let seeds: Vec<f64> = orbits.iter().map(|o| o.x0).collect();
//! assert_eq!(seeds.len(), 3);
//! assert!((seeds[2] - 2.0).abs() < 1e-9);
//! assert_eq!(orbits[2].stability, Stability::AsymptoticallyStable);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bifurcation;
pub mod cli;
pub mod config;
pub mod error;
pub mod flow;
pub mod output;
pub mod periodic;
pub mod reference;
pub mod rmap;
pub mod scalar;
pub mod vectorfield;

pub use bifurcation::{
    lambda_sweep, omega_scan, regime_table, saddle_node_points, transcritical_lambda, BifurcationKind,
    BifurcationPoint, RegimeTable, SweepDiagram,
};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use flow::{flow_map, flow_with_variational, pulse_sequence, simulate_impulsive, IntegratorConfig, Trajectory};
pub use periodic::{classify, find_periodic_orbits, lambda_for_initial_condition, verify_orbit, PeriodicOrbit, Stability};
pub use rmap::{IntervalBounds, StroboscopicAnalyzer};
pub use vectorfield::{Equilibrium, EquilibriumKind, PolynomialVectorField};
