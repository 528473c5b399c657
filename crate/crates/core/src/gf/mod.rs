//! Exact arithmetic over ℤ_p and number theoretic transforms.

mod field;
mod matrix;
mod ntt;
mod params;
mod word;

pub use field::{is_prime, prime_factors, primitive_root, Field};
pub use matrix::{hadamard, hadamard_inv, GfMatrix};
pub use ntt::{intt1d, ntt1d, Axis, InttCounter, NttEngine, NttPlan, ShiftMap};
pub use params::{GfParams, REFERENCE};
pub use word::Word;
