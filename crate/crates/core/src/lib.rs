//! Disturbance-observer-based, thrust-limit-safe control of a fully actuated
//! aerial manipulator.
//!
//! The crate is `no_std` (with `alloc`) and contains only the numerical
//! pieces: the Euler-Lagrange vehicle model and tilted-rotor allocation
//! ([`dynamics`]), the disturbance observer ([`observer`]), the DOB-based
//! control law and the two comparison baselines ([`controller`]), the motor
//! thrust barrier functions with their QP safety filter ([`safety_filter`],
//! [`qp_solver`]), penalty-contact interaction models ([`environment`]) and a
//! deterministic fixed-step closed-loop simulator ([`sim`]).
//!
//! File formats, CSV output and the command line live in the `aphi` crate.
//!
//! Conventions used throughout:
//!
//! * `q = [p; phi]` with `p` the world position (z up) and `phi = [roll; pitch; yaw]`
//!   ZYX Euler angles, `R = Rz(yaw) Ry(pitch) Rx(roll)`.
//! * Generalized wrenches are `[world force; Q^T * body moment]`.
//! * The 36-dimensional augmented state is `x = [q; q_dot; zeta; chi; q_d; q_d_dot]`.
#![no_std]
// Negated float comparisons below deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod controller;
pub mod dynamics;
pub mod environment;
pub mod error;
pub mod observer;
pub mod qp_solver;
pub mod safety_filter;
pub mod sim;

pub use error::Error;

pub type Vector3 = nalgebra::Vector3<f64>;
pub type Vector6 = nalgebra::Vector6<f64>;
pub type Matrix3 = nalgebra::Matrix3<f64>;
pub type Matrix6 = nalgebra::Matrix6<f64>;
