//! Spectra of translation-covariant single-particle Lindbladians on the
//! lattice `Z`.
//!
//! After vectorization and a partial Fourier transform the generator becomes a
//! direct integral over momenta `q` of fibers `T(q) + |Gamma_L><Gamma_R|`, with
//! `T(q)` a banded Laurent operator. The fiber spectrum is the symbol curve of
//! `T(q)` plus the roots of a scalar secular function.

pub mod disorder;
pub mod error;
pub mod finite;
pub mod laurent;
pub mod model;
pub mod numerics;
pub mod spectrum;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
