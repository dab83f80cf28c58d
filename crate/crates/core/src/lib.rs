//! Solver library for geometrically distinct rotation-type orbits of
//! spatially periodic Hamiltonian systems at prescribed energy and rotation
//! vector.
//!
//! The pipeline: gauge geometry of the energy surface ([`gauge`]), symplectic
//! dilations and shell transport ([`dilation`]), the periodically extended
//! Hamiltonian ([`modification`]), Fourier loop spaces ([`loops`]),
//! saddle-point reduction and critical-point search ([`reduction`]), transfer
//! between fixed-period and fixed-energy problems with distinctness
//! certification ([`orbits`]), and independent ground-truth generators
//! ([`oracle`]).

pub mod dilation;
pub mod error;
pub mod gauge;
pub mod hamiltonians;
pub mod loops;
pub mod modification;
pub mod ode;
pub mod opt;
pub mod oracle;
pub mod orbits;
pub mod reduction;

pub use error::{Error, Result};
