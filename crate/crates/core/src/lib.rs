//! Passive tracer transport in a Gaussian, Markovian, incompressible random
//! velocity field with a nonzero mean drift.
//!
//! The toolkit has three legs that check each other:
//!
//! * [`field`] synthesizes the velocity field as a finite sum of divergence-free
//!   Fourier modes with exact Ornstein-Uhlenbeck dynamics per mode, and
//!   [`tracer`] integrates particle paths through it.
//! * [`theory`] evaluates the closed-form spectral integrals (Taylor-Kubo
//!   diffusivity, fractional-Brownian-motion amplitude, corrector variances)
//!   by deterministic adaptive quadrature.
//! * [`stats`] turns path ensembles into mean-squared-displacement curves,
//!   scaling exponents and Hurst estimates, with an exact fBM sampler as
//!   reference.
//!
//! [`spectrum`] holds the model parameters and classifies the (alpha, beta)
//! exponent plane into the diffusive and fractional-Brownian scaling regimes.

pub mod error;
pub mod field;
pub mod geom;
pub mod quad;
pub mod rng;
pub mod spectrum;
pub mod stats;
pub mod theory;
pub mod tracer;

pub use error::Error;
pub use geom::{SpatialMat, SpatialVec};
pub use spectrum::{Regime, RegimeReport, SpectrumParams};
pub use theory::QuadratureResult;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
