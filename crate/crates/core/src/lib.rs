//! Relay-assisted molecular communication via diffusion with non-uniform BCSK.
//!
//! The crate is organised bottom-up:
//!
//! - [`channel`]: presence probability of a molecule inside a spherical passive
//!   receiver under 3-D Brownian motion with drift, and the arrival tables built
//!   from it.
//! - [`modulation`]: pulse shapes `g(i)` for bit "1", by molecule count or
//!   energy budget.
//! - [`energy`]: exocytosis energy model with a vesicle radius that grows with
//!   the packet size.
//! - [`reception`]: conditional Gaussian count statistics with ISI and the MAP
//!   threshold.
//! - [`ber`]: direct and decode-and-forward relay bit error probabilities.
//! - [`link`]: a full S→R→D scenario evaluated at one symbol duration.
//! - [`optimizer`]: level bisection for the symbol duration maximizing the
//!   successfully received bit rate.
//! - [`montecarlo`]: independent particle, quadrature and bit-level oracles.

pub mod ber;
pub mod channel;
pub mod energy;
pub mod error;
pub mod link;
pub mod modulation;
pub mod montecarlo;
pub mod optimizer;
pub mod reception;

pub use error::{Error, Result};
