//! FFT-based homogenization of periodic voxel microstructures.
//!
//! The crate solves the periodic linear-elastic cell problem with three
//! discretizations of the strain-displacement relation:
//!
//! - a tetrahedral finite-difference stencil on two interleaved FCC
//!   sub-lattices, whose averaged fields keep the cubic symmetry of the grid;
//! - the rotated staggered-grid stencil;
//! - the continuum Green operator with the classical fixed point.
//!
//! [`solver::Solver`] drives the iteration, [`analysis`] holds the dense
//! reference solver and post-processing, and [`config`]/[`io`] read run
//! descriptions and write field files.

pub mod analysis;
pub mod config;
pub mod error;
pub mod green;
pub mod grid;
pub mod io;
pub mod microstructure;
pub mod solver;
pub mod stencil;
pub mod tensor;

pub use error::{Error, Result};
pub use grid::{FreqVector, Grid, TensorField, TensorFieldQ, VectorFieldQ};
pub use microstructure::{MaterialFields, Phase};
pub use solver::{Algorithm, ConvergenceReport, Loading, ResidualNorm, SolveOutput, Solver, SolverOptions, SolverSetup, Termination};
pub use stencil::Scheme;
pub use tensor::{IsotropicConstants, VoigtTensor2, VoigtTensor4};
