//! Event-triggered sampling for LQG-controlled linear systems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod integrator;
pub mod io;
pub mod linalg;
pub mod lqg;
pub mod plants;
pub mod riccati;
pub mod sim;
pub mod stefan;
