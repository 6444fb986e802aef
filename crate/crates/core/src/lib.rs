//! Estimation of anti-Monge and pre-anti-Monge matrices from noisy
//! observations: projection onto the cone, Variance Sorting for unknown row
//! and column orders, singular value thresholding, and a Monte Carlo harness
//! for error rates.
//!
//! The guide in `book/` walks through each piece; its examples are compiled
//! and run as doctests.

pub mod error;
pub mod experiment;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod permutation;
pub mod projection;
pub mod svt;
pub mod synthetic;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/cone.md")]
    mod cone {}
    #[doc = include_str!("../../../book/src/projection.md")]
    mod projection {}
    #[doc = include_str!("../../../book/src/variance-sorting.md")]
    mod variance_sorting {}
    #[doc = include_str!("../../../book/src/svt.md")]
    mod svt {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
