//! Penning-trap ion dynamics with laser cooling, radial-mode coupling,
//! photon-correlation analysis and camera imaging.
//!
//! The guide in `book/` walks through each module with runnable examples.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// `is_multiple_of` is newer than the supported toolchain
#![allow(clippy::manual_is_multiple_of)]

pub mod config;
pub mod constants;
pub mod dynamics;
pub mod envelope;
pub mod error;
pub mod imaging;
pub mod io;
pub mod photon_stats;
pub mod scenario;
pub mod trap;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/trap.md")]
    mod trap {}
    #[doc = include_str!("../../../book/src/envelope.md")]
    mod envelope {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/photon-stats.md")]
    mod photon_stats {}
    #[doc = include_str!("../../../book/src/imaging.md")]
    mod imaging {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
