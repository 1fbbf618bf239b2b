#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod exact;
pub mod mc;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod theory;
pub mod verify;
