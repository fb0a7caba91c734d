//! Nth-level fractional derivatives: exact power-law algebra, Mittag-Leffler
//! functions, grid operators, relaxation solutions, a Picard solver and
//! least-squares fitting.

pub mod error;
pub mod fitting;
pub mod gridops;
pub mod mlf;
pub mod powerlaw;
pub mod quad;
pub mod relax;
pub mod special;
pub mod specparams;
pub mod sum;
pub mod verify;
pub mod volterra;

pub use error::{Error, Result};
