//! Band/gap spectrum of the periodic Hill operator `-y'' + (q0 + q) y`,
//! the KdV action variables and the nonlinear part of the KdV Hamiltonian
//! expressed through quasimomentum gap integrals, together with a
//! verification harness for the identities and two-sided estimates
//! relating them.

pub mod action_integrals;
pub mod cli;
pub mod corpus;
pub mod ddouble;
pub mod error;
pub mod hill_floquet;
pub mod ode;
pub mod potential;
pub mod quadrature;
pub mod roots;
pub mod verify;

pub use error::{Result, SpectralError};
pub use potential::{direct_functionals, DirectFunctionals, Potential};
