//! Simulation and verification of multifractional Gaussian moving averages
//! `X_t = ∫ g_s(t) dW_s` with a functional Hurst exponent.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod gaussian;
pub mod grid;
pub mod hurst;
pub mod io;
pub mod kernels;
pub mod noise;
pub mod rng;
pub mod simulate;
pub mod special;

pub use error::{Error, Result};
pub use grid::{SampledPath, UniformGrid};
