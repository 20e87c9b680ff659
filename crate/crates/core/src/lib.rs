//! Theoretical accuracy limits of RSS-based range estimation for visible
//! light links whose receiver shot noise grows with the received power.
//!
//! The crate is organised bottom up:
//!
//! - [`sysparams`]: device and physical parameters, JSON schema.
//! - [`channel`]: Lambertian LOS gain, received power and its distance
//!   derivatives.
//! - [`noise`]: thermal, background, dark-current and signal shot noise.
//! - [`bounds`]: Fisher information, √CRLB and numerical oracles.
//! - [`mle`]: maximum-likelihood range estimation and Monte Carlo.
//! - [`sweep`]: parameter grids and the optimal Lambertian order.
//! - [`cli`]: the `vlcrange` command line.

pub mod bounds;
pub mod channel;
pub mod cli;
pub mod error;
pub mod mle;
pub mod noise;
pub mod optimize;
pub mod rng;
pub mod sweep;
pub mod sysparams;

pub use bounds::{bound_at, crlb_sqrt, crlb_sqrt_legacy, fisher_information, BoundResult};
pub use channel::Geometry;
pub use error::{Error, Result};
pub use noise::{total_noise, NoiseBreakdown};
pub use sysparams::{default_parameters, parse_parameters, serialize_parameters, SystemParameters};
