use std::fmt::{Debug, Display};
use std::hash::Hash;

use num_traits::{PrimInt, Unsigned};

/// Unsigned machine word used to store field elements.
///
/// Every word type carries a `Wide` companion with twice the bits, so the
/// product of two reduced elements never overflows before reduction. Any
/// modulus up to `Self::max_value()` is therefore safe.
pub trait Word: PrimInt + Unsigned + Hash + Debug + Display + Default + Send + Sync + 'static {
    type Wide: PrimInt + Unsigned + Debug;

    /// Bit width of the storage word.
    const BITS: u32;

    fn widen(self) -> Self::Wide;

    /// Narrowing cast; callers guarantee the value fits.
    fn narrow(wide: Self::Wide) -> Self;

    /// Constant for [`Word::mul_mod`], derived once per modulus.
    fn reducer(p: Self) -> u64;

    /// `a * b mod p` for reduced `a`, `b`, with `reducer = Self::reducer(p)`.
    fn mul_mod(a: Self, b: Self, p: Self, reducer: u64) -> Self;

    /// Companion of a fixed multiplier `w` for [`Word::mul_fixed`].
    fn fixed_companion(w: Self, p: Self) -> u64;

    /// `a * w mod p` for reduced `a` and a multiplier known in advance.
    fn mul_fixed(a: Self, w: Self, companion: u64, p: Self) -> Self;

    #[inline]
    fn from_u64(v: u64) -> Option<Self> {
        <Self as num_traits::NumCast>::from(v)
    }

    #[inline]
    fn as_u64(self) -> u64 {
        self.to_u64().expect("word fits in u64")
    }
}

macro_rules! impl_word {
    ($t:ty, $wide:ty) => {
        impl Word for $t {
            type Wide = $wide;
            const BITS: u32 = <$t>::BITS;

            #[inline(always)]
            fn widen(self) -> $wide {
                self as $wide
            }

            #[inline(always)]
            fn narrow(wide: $wide) -> Self {
                wide as $t
            }

            // Barrett: with mu = floor(2^64 / p) and x < p² < 2^64 the
            // estimated quotient is short by at most one.
            #[inline(always)]
            fn reducer(p: Self) -> u64 {
                (u64::MAX as u128 + 1).div_euclid(p as u128) as u64
            }

            #[inline(always)]
            fn mul_mod(a: Self, b: Self, p: Self, mu: u64) -> Self {
                let x = a as u64 * b as u64;
                let q = ((x as u128 * mu as u128) >> 64) as u64;
                let r = x - q * p as u64;
                (if r >= p as u64 { r - p as u64 } else { r }) as $t
            }

            // Shoup: w' = floor(w·2^32 / p); the quotient estimate is short by at most one.
            #[inline(always)]
            fn fixed_companion(w: Self, p: Self) -> u64 {
                ((w as u64) << 32) / p as u64
            }

            #[inline(always)]
            fn mul_fixed(a: Self, w: Self, companion: u64, p: Self) -> Self {
                let q = (a as u64 * companion) >> 32;
                let r = (a as u64 * w as u64).wrapping_sub(q * p as u64);
                (if r >= p as u64 { r - p as u64 } else { r }) as $t
            }
        }
    };
}

impl_word!(u16, u32);
impl_word!(u32, u64);

impl Word for u64 {
    type Wide = u128;
    const BITS: u32 = u64::BITS;

    #[inline(always)]
    fn widen(self) -> u128 {
        self as u128
    }

    #[inline(always)]
    fn narrow(wide: u128) -> Self {
        wide as u64
    }

    #[inline(always)]
    fn reducer(_: Self) -> u64 {
        0
    }

    #[inline(always)]
    fn mul_mod(a: Self, b: Self, p: Self, _: u64) -> Self {
        (a as u128 * b as u128 % p as u128) as u64
    }

    #[inline(always)]
    fn fixed_companion(_: Self, _: Self) -> u64 {
        0
    }

    #[inline(always)]
    fn mul_fixed(a: Self, w: Self, _: u64, p: Self) -> Self {
        Self::mul_mod(a, w, p, 0)
    }
}
