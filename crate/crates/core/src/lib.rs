//! Numerical reduction of the incompressible Navier–Stokes equations to a
//! quadratic fixed-point problem, with the checks that go with it.

pub mod bounds;
pub mod constraint_system;
pub mod derivative;
pub mod error;
pub mod factorization;
pub mod fixed_point;
pub mod forcing;
pub mod fourier_symbol;
pub mod grid;
pub mod heat;
pub mod layout;
pub mod linalg;
pub mod multi_index;
pub mod oracles;
pub mod potential;
pub mod verifier;
pub mod w_tables;

pub use error::{Error, Result};
