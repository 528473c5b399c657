use super::word::Word;

/// Prime field ℤ_p over storage word `W`.
///
/// Elements are always kept reduced into `[0, p)`. The modulus is not checked
/// for primality here; see [`GfParams`](super::GfParams) for validated use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Field<W: Word> {
    p: W,
    reducer: u64,
}

impl<W: Word> Field<W> {
    pub fn new(p: W) -> Self {
        assert!(p > W::one(), "modulus must exceed 1");
        Self { p, reducer: W::reducer(p) }
    }

    #[inline(always)]
    pub fn modulus(&self) -> W {
        self.p
    }

    #[inline(always)]
    pub fn reduce_u64(&self, v: u64) -> W {
        W::from_u64(v % self.p.as_u64()).expect("reduced value fits")
    }

    #[inline(always)]
    pub fn add(&self, a: W, b: W) -> W {
        let s = a.widen() + b.widen();
        let p = self.p.widen();
        W::narrow(if s >= p { s - p } else { s })
    }

    #[inline(always)]
    pub fn sub(&self, a: W, b: W) -> W {
        if a >= b {
            a - b
        } else {
            W::narrow(a.widen() + self.p.widen() - b.widen())
        }
    }

    #[inline(always)]
    pub fn neg(&self, a: W) -> W {
        if a.is_zero() {
            a
        } else {
            self.p - a
        }
    }

    #[inline(always)]
    pub fn mul(&self, a: W, b: W) -> W {
        W::mul_mod(a, b, self.p, self.reducer)
    }

    pub fn pow(&self, base: W, mut exp: u64) -> W {
        let mut acc = W::one() % self.p;
        let mut b = base % self.p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse by the extended Euclidean algorithm.
    /// Returns `None` for zero (or any non-unit when `p` is composite).
    pub fn inv(&self, a: W) -> Option<W> {
        let p = self.p.as_u64() as i128;
        let (mut r0, mut r1) = (p, (a.as_u64() as i128) % p);
        let (mut s0, mut s1) = (0i128, 1i128);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (s0, s1) = (s1, s0 - q * s1);
        }
        if r0 != 1 {
            return None;
        }
        W::from_u64(s0.rem_euclid(p) as u64)
    }

    /// Uniform draw from ℤ_p^*.
    pub fn random_unit<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> W {
        W::from_u64(rng.gen_range(1..self.p.as_u64())).expect("sample below p")
    }

    pub fn random_units<R: rand::Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<W> {
        (0..n).map(|_| self.random_unit(rng)).collect()
    }

    /// Multiplicative order of `a`, found by stripping prime factors off `p - 1`.
    /// Only meaningful for prime `p`; returns `None` for zero.
    pub fn order(&self, a: W) -> Option<u64> {
        if (a % self.p).is_zero() {
            return None;
        }
        let mut order = self.p.as_u64() - 1;
        for (q, _) in prime_factors(order) {
            while order % q == 0 && self.pow(a, order / q) == W::one() {
                order /= q;
            }
        }
        Some(order)
    }

    /// Checks `a` has order exactly `n` using `a^n = 1` and `a^(n/q) != 1`
    /// for every prime `q | n`.
    pub fn has_order(&self, a: W, n: u64) -> bool {
        if n == 0 || self.pow(a, n) != W::one() {
            return false;
        }
        prime_factors(n)
            .into_iter()
            .all(|(q, _)| self.pow(a, n / q) != W::one())
    }
}

/// Prime factorisation by trial division, as `(prime, multiplicity)` pairs.
pub fn prime_factors(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            let mut e = 0;
            while n % d == 0 {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

fn mul_mod_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod_u64(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod_u64(acc, b, m);
        }
        b = mul_mod_u64(b, b, m);
        e >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin, exact for all 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const SMALL: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for &q in &SMALL {
        if n % q == 0 {
            return n == q;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &SMALL {
        let mut x = pow_mod_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod_u64(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest generator of ℤ_p^* for prime `p`.
pub fn primitive_root(p: u64) -> u64 {
    if p == 2 {
        return 1;
    }
    let factors = prime_factors(p - 1);
    (2..p)
        .find(|&g| factors.iter().all(|&(q, _)| pow_mod_u64(g, (p - 1) / q, p) != 1))
        .expect("every prime has a primitive root")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primality_matches_trial_division() {
        let naive = |n: u64| n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0);
        for n in 0..5000 {
            assert_eq!(is_prime(n), naive(n), "n = {n}");
        }
        assert!(is_prime(8641));
        assert!(is_prime(18446744073709551557));
        assert!(!is_prime(3215031751));
    }

    #[test]
    fn inverse_and_pow_agree() {
        let f = Field::new(8641u32);
        for a in 1..200u32 {
            let inv = f.inv(a).unwrap();
            assert_eq!(f.mul(a, inv), 1);
            assert_eq!(inv, f.pow(a, 8639));
        }
        assert_eq!(f.inv(0), None);
    }

    #[test]
    fn orders_of_reference_roots() {
        let f = Field::new(8641u32);
        assert_eq!(f.pow(40, 32), 1);
        assert_ne!(f.pow(40, 16), 1);
        assert_eq!(f.order(40), Some(32));
        assert_eq!(f.order(948), Some(64));
        assert!(f.has_order(40, 32));
        assert!(!f.has_order(40, 64));
        assert_eq!(f.order(1), Some(1));
    }

    #[test]
    fn add_sub_wrap_near_word_limit() {
        let f = Field::new(65521u16);
        assert_eq!(f.add(65520, 65520), 65519);
        assert_eq!(f.sub(0, 1), 65520);
        assert_eq!(f.mul(65520, 65520), 1);
        assert_eq!(f.neg(0), 0);
    }

    #[test]
    fn primitive_roots() {
        assert_eq!(primitive_root(8641), 17);
        assert_eq!(primitive_root(3), 2);
        assert_eq!(primitive_root(2), 1);
    }
}
