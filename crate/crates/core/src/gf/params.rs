use super::field::{is_prime, primitive_root, Field};
use super::word::Word;
use crate::error::{Error, Result};

/// Validated transform configuration: prime `p` with `h | p-1` and `w | p-1`,
/// `alpha` of multiplicative order `h` and `beta` of order `w`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GfParams<W: Word> {
    p: W,
    alpha: W,
    beta: W,
    h: usize,
    w: usize,
}

/// Reference configuration: 32x64 images over p = 8641.
pub const REFERENCE: (u64, u64, u64, usize, usize) = (8641, 40, 948, 32, 64);

impl<W: Word> GfParams<W> {
    pub fn validate(p: u64, alpha: u64, beta: u64, h: usize, w: usize) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::InvalidParameter("image dimensions must be positive".into()));
        }
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        let pw = W::from_u64(p).ok_or(Error::ModulusTooWide { p, bits: W::BITS })?;
        for size in [h as u64, w as u64] {
            if (p - 1) % size != 0 {
                return Err(Error::DivisibilityViolation { size, p });
            }
        }
        let field = Field::new(pw);
        let check = |which: &'static str, elem: u64, n: usize| -> Result<W> {
            let e = field.reduce_u64(elem);
            if field.has_order(e, n as u64) {
                Ok(e)
            } else {
                Err(Error::OrderMismatch {
                    which,
                    expected: n as u64,
                    found: field.order(e).unwrap_or(0),
                })
            }
        };
        let alpha = check("alpha", alpha, h)?;
        let beta = check("beta", beta, w)?;
        Ok(Self { p: pw, alpha, beta, h, w })
    }

    /// Smallest prime `p ≡ 1 (mod lcm(h, w))` strictly above `correlation_bound`,
    /// with roots of order `h` and `w` derived from the least primitive root.
    pub fn find(h: usize, w: usize, correlation_bound: u64) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::InvalidParameter("image dimensions must be positive".into()));
        }
        let step = lcm(h as u64, w as u64);
        let mut p = step + 1;
        if p <= correlation_bound {
            p += (correlation_bound - p) / step * step + step;
        }
        while !is_prime(p) {
            p += step;
        }
        let g = primitive_root(p);
        let pw = W::from_u64(p).ok_or(Error::ModulusTooWide { p, bits: W::BITS })?;
        let field = Field::new(pw);
        let g = field.reduce_u64(g);
        let alpha = field.pow(g, (p - 1) / h as u64);
        let beta = field.pow(g, (p - 1) / w as u64);
        Ok(Self { p: pw, alpha, beta, h, w })
    }

    pub fn reference() -> Self {
        let (p, a, b, h, w) = REFERENCE;
        Self::validate(p, a, b, h, w).expect("reference parameters are valid")
    }

    /// Rejects moduli that do not exceed the largest correlation value the
    /// caller's pixel range can produce.
    pub fn check_correlation_bound(&self, bound: u64) -> Result<()> {
        if self.p.as_u64() > bound {
            Ok(())
        } else {
            Err(Error::ModulusTooSmall { p: self.p.as_u64(), bound })
        }
    }

    pub fn field(&self) -> Field<W> {
        Field::new(self.p)
    }

    pub fn p(&self) -> W {
        self.p
    }

    pub fn alpha(&self) -> W {
        self.alpha
    }

    pub fn beta(&self) -> W {
        self.beta
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.h, self.w)
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_parameters_validate() {
        let params = GfParams::<u32>::validate(8641, 40, 948, 32, 64).unwrap();
        assert_eq!(params.p(), 8641);
        assert_eq!(params.shape(), (32, 64));
    }

    #[test]
    fn identity_element_is_rejected() {
        let err = GfParams::<u32>::validate(8641, 1, 948, 32, 64).unwrap_err();
        assert!(matches!(
            err,
            Error::OrderMismatch { which: "alpha", expected: 32, found: 1 }
        ));
    }

    #[test]
    fn composite_and_divisibility_errors() {
        assert!(matches!(
            GfParams::<u32>::validate(8640, 40, 948, 32, 64),
            Err(Error::NotPrime(8640))
        ));
        assert!(matches!(
            GfParams::<u32>::validate(8641, 40, 948, 32, 7),
            Err(Error::DivisibilityViolation { size: 7, .. })
        ));
        assert!(matches!(
            GfParams::<u16>::validate(65537, 3, 3, 2, 2),
            Err(Error::ModulusTooWide { p: 65537, bits: 16 })
        ));
    }

    #[test]
    fn find_params_matches_search_oracle() {
        // Oracle values from an independent primality + order search.
        let params = GfParams::<u32>::find(32, 64, 8192).unwrap();
        assert_eq!(params.p(), 8513);
        let f = params.field();
        assert!(f.has_order(params.alpha(), 32));
        assert!(f.has_order(params.beta(), 64));
        GfParams::<u32>::validate(8513, params.alpha() as u64, params.beta() as u64, 32, 64).unwrap();

        let small = GfParams::<u32>::find(2, 2, 2).unwrap();
        assert_eq!((small.p(), small.alpha(), small.beta()), (3, 2, 2));

        let unit = GfParams::<u32>::find(1, 1, 1).unwrap();
        assert_eq!((unit.p(), unit.alpha(), unit.beta()), (2, 1, 1));
    }

    #[test]
    fn correlation_bound() {
        let params = GfParams::<u32>::reference();
        params.check_correlation_bound(4 * 32 * 64).unwrap();
        assert!(params.check_correlation_bound(8641).is_err());
    }
}
