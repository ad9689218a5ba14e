//! Multi-scale models of bidirectional pedestrian flow in a narrow
//! corridor: a stochastic two-species exclusion cellular automaton, its
//! mean-field lattice ODE system, and the macroscopic conservation-law
//! system with optional nonlinear viscosity, solved by a central-upwind
//! scheme.

pub mod ca;
pub mod error;
pub mod field;
pub mod io;
pub mod meso;
pub mod model;
pub mod pde;
pub mod scenarios;

pub use error::{Error, Result, Species};
pub use field::DensityField;
pub use model::{DensityPair, VelocityParams};
