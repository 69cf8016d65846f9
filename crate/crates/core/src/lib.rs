//! Superimposed random coding for bit-signature prescreening.
//!
//! A source bit string of length `N` is compressed into a signature of
//! length `n` by OR-ing together the random code words of its set bits.
//! The crate provides the distribution algebra needed to predict signature
//! statistics and false-drop rates, code-weight optimization, reproducible
//! codebooks, Monte Carlo validation and the file formats used by the
//! `supcode` command-line tool.

pub mod analysis;
pub mod bitkit;
pub mod cli;
pub mod codegen;
pub mod error;
pub mod isotropic;
mod numeric;
pub mod optimizer;
pub mod rng;
pub mod simulator;

pub use bitkit::BitPattern;
pub use codegen::{CodeKind, CodeSpec, Codebook};
pub use error::{Error, Result};
pub use isotropic::{Basis, IsotropicDistribution, MomentSet};
pub use numeric::{binomial, binomial_exact, subset_ratio};
