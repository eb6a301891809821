//! Finite-strain Kelvin–Voigt thermoviscoelasticity on Q1 quadrilaterals.
//!
//! Each time step first minimizes a mechanical incremental energy at frozen
//! temperature, then a strictly convex thermal functional at frozen
//! deformation. Two discrete dissipations are available: one built from the
//! right Cauchy–Green increment (invariant under independent rotations of both
//! time levels) and the legacy linearized rate, which heats rigidly rotating
//! bodies.

pub mod assembly;
pub mod error;
pub mod experiments;
pub mod io;
pub mod materials;
pub mod mech_step;
pub mod mesh;
pub mod oracles;
pub mod tensor;
pub mod thermal_step;
pub mod timeloop;

pub use error::{Error, Result};
pub use materials::{DissipationVariant, HeatSourceVariant, MaterialKind, MaterialModel};
pub use mesh::{BoundaryTag, Mesh};
pub use timeloop::{Simulation, State, Trajectory};
