//! Sparse multi-coil MRI reconstruction with a densely connected unrolled
//! network trained as a conditional Wasserstein GAN under adaptive gradient
//! balancing.
//!
//! Everything runs on the CPU from first principles: a small reverse-mode
//! differentiation engine ([`autodiff`]), unitary Fourier transforms
//! ([`fourier`]), a synthetic multi-coil acquisition model ([`acquisition`]),
//! the generator and critic ([`networks`]), the training loop
//! ([`training`]), evaluation metrics ([`metrics`]) and file formats ([`io`]).

pub mod acquisition;
pub mod autodiff;
pub mod commands;
pub mod error;
pub mod fourier;
pub mod io;
pub mod metrics;
pub mod networks;
pub mod real;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
pub use real::Real;
