//! Harmonic explorer on rescaled triangular lattices and chordal Loewner numerics.
//!
//! The crate is organised bottom-up:
//!
//! - [`lattice`]: the triangular grid, grid approximations of Jordan domains and
//!   their two colored boundary arcs.
//! - [`harmonic`]: the discrete Laplacian and the discrete Dirichlet problem.
//! - [`explorer`]: sampling of the harmonic explorer path and its martingale audit.
//! - [`loewner`]: vertical-slit zipper, half-plane capacity, driving-function
//!   extraction, trace reconstruction and SLE driving samplers.
//! - [`conformal`]: maps of grid domains onto the upper half-plane, the chordal
//!   metric and the tip structure modulus.
//! - [`analysis`]: exponent algebra, Monte Carlo estimators and power-law fits.
//! - [`experiment`]: multi-mesh convergence experiments producing a
//!   [`experiment::ConvergenceReport`].

// guards like `!(x > 0.0)` reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod conformal;
pub mod experiment;
pub mod explorer;
pub mod geom;
pub mod harmonic;
pub mod lattice;
pub mod loewner;
pub mod rng;

pub use num_complex::Complex64;

use thiserror::Error;

/// Crate-level error, wrapping the per-module errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Lattice(#[from] lattice::LatticeError),
    #[error(transparent)]
    Harmonic(#[from] harmonic::HarmonicError),
    #[error(transparent)]
    Explorer(#[from] explorer::ExplorerError),
    #[error(transparent)]
    Loewner(#[from] loewner::LoewnerError),
    #[error(transparent)]
    Conformal(#[from] conformal::ConformalError),
    #[error(transparent)]
    Analysis(#[from] analysis::AnalysisError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
