//! Desk-scale dynamic-positioning simulation for an over-actuated surface vessel.
//!
//! The crate is organised along the signal path of the closed loop:
//!
//! * [`vessel`]: 3-DOF low-frequency plant, control delay line and the fixed-step integrator.
//! * [`environment`]: wind loads, gated wave-drift loads and the bounded random disturbance.
//! * [`rbf`]: Gaussian radial-basis-function approximator shared by both wave compensators.
//! * [`observer`]: adaptive sea-state observer with wind-coefficient estimation and the alarm latch.
//! * [`controller`]: barrier backstepping tracking law with input-delay compensation.
//! * [`allocation`]: local convex thrust allocation solved by a primal-dual projection dynamic.
//! * [`sim`]: scenario configuration, reference trajectory, closed-loop stepping and CSV logs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod controller;
pub mod environment;
pub mod error;
pub mod observer;
pub mod rbf;
pub mod sim;
pub mod vessel;

pub use error::{DpError, Result};
