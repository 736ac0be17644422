//! relaxlab: a pseudo-spectral laboratory for damped compressible Euler
//! flows, their porous-medium limit, and the Littlewood-Paley / Besov
//! machinery the analysis runs on, with every identity checked numerically
//! on periodic grids.

pub mod bony;
pub mod dyadic;
pub mod error;
pub mod euler;
pub mod field;
pub mod grid;
pub mod io;
pub mod limit;
pub mod pme;
pub mod report;
pub mod symmetry;

pub use error::{CoreError, Result};
pub use field::{ScalarField, VectorField};
pub use grid::PeriodicGrid;
