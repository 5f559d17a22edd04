//! Pseudo-spectral simulator and numerical verification harness for the
//! modified Patlak-Keller-Segel system
//!
//! ```text
//! rho_t + div(rho grad c) = lap rho,   c = -(1/(d pi)) ln|x| * rho,
//! ```
//!
//! posed on R^d (d = 1, 2, 3) and approximated on a large periodic box.

pub mod chemo;
pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod exponent;
pub mod grid;
pub mod harness;
pub mod heat;

pub use error::{Error, Result};
pub use grid::{Field, GridSpec, MultiIndex, SpectralGrid};
