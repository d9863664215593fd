//! Excited random walk laboratory.

pub mod excursion;
pub mod harness;
pub mod holes;
pub mod jump;
pub mod lattice;
pub mod oracles;
pub mod rng;
pub mod walk;
