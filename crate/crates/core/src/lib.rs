//! Generalized dual-discriminator GANs.
//!
//! The crate has three layers:
//!
//! * closed-form theory over finite supports: [`losses`], [`divergences`],
//!   [`theory`] and the [`verify`] suite that checks every identity against an
//!   independent brute-force route;
//! * a small dense-network stack: [`nn`] (reverse-mode gradients, Adam) and
//!   [`data`] (ring-of-Gaussians sampler, noise, seeded streams);
//! * the experiment: [`trainer`] (vanilla, D2, D2 α and arbitrary-loss D2
//!   GANs) and [`metrics`] (symmetric KL, exact empirical Wasserstein, mode
//!   coverage).
//!
//! All logarithms are natural.

pub mod data;
pub mod divergences;
mod error;
pub mod losses;
pub mod metrics;
pub mod nn;
pub mod optimize;
pub mod theory;
pub mod trainer;
pub mod verify;

pub use error::{Error, Result};
