pub mod cirf;
pub mod error;
pub mod gf;
pub mod identify;
pub mod index;
pub mod lowrank;
pub mod suites;
pub mod synth;

pub use error::{Error, Result};

/// Engine over 32-bit words, enough for every modulus below 2^32.
pub type Engine = gf::NttEngine<u32>;
pub type Matrix = gf::GfMatrix<u32>;
