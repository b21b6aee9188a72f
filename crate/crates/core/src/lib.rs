//! Numerical Plateau solver by the Douglas method.
//!
//! A closed contour is spanned by a disc-type minimal surface found as the
//! harmonic extension of the boundary parameterization that minimizes the
//! Douglas functional. The pipeline is:
//!
//! 1. [`contour`]: load, validate and resample the contour.
//! 2. [`douglas`]: evaluate the functional and its gradient over monotone
//!    boundary reparameterizations.
//! 3. [`solver`]: minimize, build the [`harmonic::HarmonicDisc`] and certify
//!    it with [`diagnostics`].

pub mod annulus;
pub mod contour;
pub mod diagnostics;
pub mod douglas;
pub mod error;
pub mod harmonic;
pub mod io;
pub mod mesh;
pub mod optim;
pub mod quadrature;
pub mod solver;
pub mod spline;

pub use error::{PlateauError, Result};
