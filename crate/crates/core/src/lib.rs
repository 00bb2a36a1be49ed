//! Information geometry of tempered stable processes.
//!
//! The crate covers the generalized (GTS), classical (CTS) and rapidly
//! decreasing (RDTS) tempered stable families:
//!
//! - [`params`]: validated parameter records and equivalent-measure pairs.
//! - [`special`]: real Gamma and Kummer's confluent hypergeometric function.
//! - [`levy`]: Lévy densities, tempering functions, Radon–Nikodym derivatives.
//! - [`divergence`]: closed-form α-divergences and quadrature oracles.
//! - [`geometry`]: Fisher metrics, Levi-Civita and α-connections.
//! - [`charfn`]: characteristic functions, FFT densities and sampling.
//! - [`inference`]: Jeffreys prior, penalized likelihood, shrinkage ansatzes.
//! - [`cli`]: the `tsgeo` command-line front end.

pub mod charfn;
pub mod cli;
pub mod divergence;
pub mod error;
pub mod geometry;
pub mod inference;
pub mod levy;
pub mod params;
pub mod quad;
pub mod special;

pub use error::{Error, Result};
