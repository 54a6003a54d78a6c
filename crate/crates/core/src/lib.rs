//! Topological Aharonov–Casher and scalar Aharonov–Bohm phases of a neutral
//! spin-1/2 particle with an anomalous magnetic moment.
//!
//! Natural units ħ = c = 1, Heaviside–Lorentz fields, metric (+, −, −, −)
//! and ε^{0123} = +1 throughout.

pub mod dynamics;
pub mod error;
pub mod fields;
pub mod gauge;
pub mod phase;
pub mod spinor;

pub use error::{Error, Result};

// The guide's code blocks run as doc-tests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/spinors.md")]
    mod spinors {}
    #[doc = include_str!("../../../book/src/fields.md")]
    mod fields {}
    #[doc = include_str!("../../../book/src/gauge.md")]
    mod gauge {}
    #[doc = include_str!("../../../book/src/phases.md")]
    mod phases {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/precession.md")]
    mod precession {}
}
