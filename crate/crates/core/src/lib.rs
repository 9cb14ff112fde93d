//! Calibration and analysis of request-for-quote (RFQ) markets.
//!
//! Dealer quotes follow a skew exponential power (SEP) law and client
//! reservation values a Gaussian law, both on the reduced-quote scale
//! `(price - mid) / half_spread`. The crate fits these laws by maximum
//! likelihood from censored RFQ outcomes, simulates synthetic RFQ flows, and
//! derives best-competitor-price densities and hit-ratio curves.

pub mod analytics;
pub mod cheb;
pub mod error;
pub mod fit;
pub mod io;
pub mod likelihood;
pub mod model;
pub mod optim;
pub mod quadrature;
pub mod record;
pub mod sep;
pub mod sim;

pub use error::{Error, Result};
