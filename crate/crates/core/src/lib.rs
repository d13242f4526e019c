//! Numerical toolkit for plurisubharmonic potentials and cone geometry:
//! finite-difference Levi forms, regularized maxima, potential gluing with
//! certified positivity, radial flows on cone potentials, and Sasakian
//! level-set checks.

pub mod calculus;
pub mod cone_flow;
pub mod error;
pub mod potentials;
pub mod regmax;
pub mod report;
pub mod sampling;
pub mod gluing;
pub mod sasaki;

pub use error::{CalcError, CalcResult};
