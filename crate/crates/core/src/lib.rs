//! Spectral computations for discrete Schrödinger operators with Sturmian
//! potentials V(n) = λ·(⌊(n+1)β⌋ − ⌊nβ⌋).

pub mod bandtree;
pub mod cli;
pub mod contfrac;
pub mod dos;
pub mod error;
pub mod holder;
pub mod schrodinger;
pub mod search;
pub mod suite;
pub mod tracemap;

pub use error::{Error, Result};
