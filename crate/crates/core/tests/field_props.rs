use cirf_core::gf::{is_prime, Field, GfParams, Word};
use proptest::prelude::*;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

fn modpow(b: u64, mut e: u64, p: u64) -> u64 {
    let (mut acc, mut b) = (1u128, b as u128 % p as u128);
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % p as u128;
        }
        b = b * b % p as u128;
        e >>= 1;
    }
    acc as u64
}

fn prime_below(limit: u64) -> impl Strategy<Value = u64> {
    (3u64..limit).prop_filter_map("prime", move |n| {
        (n..n + 2000).find(|&m| is_prime(m) && m < limit)
    })
}

fn agrees<W: Word>(p: u64, a: u64, b: u64, e: u64) -> Result<(), TestCaseError> {
    let f = Field::new(W::from_u64(p).unwrap());
    let (a, b) = (a % p, b % p);
    let (wa, wb) = (W::from_u64(a).unwrap(), W::from_u64(b).unwrap());
    let big = |v: u128| (v % p as u128) as u64;
    prop_assert_eq!(f.mul(wa, wb).as_u64(), big(a as u128 * b as u128));
    prop_assert_eq!(f.add(wa, wb).as_u64(), big(a as u128 + b as u128));
    prop_assert_eq!(f.sub(wa, wb).as_u64(), big(a as u128 + p as u128 - b as u128));
    prop_assert_eq!(f.pow(wa, e).as_u64(), modpow(a, e, p));
    let c = W::fixed_companion(wb, f.modulus());
    prop_assert_eq!(W::mul_fixed(wa, wb, c, f.modulus()).as_u64(), big(a as u128 * b as u128));
    match f.inv(wa) {
        Some(i) => prop_assert_eq!(big(a as u128 * i.as_u64() as u128), 1),
        None => prop_assert_eq!(a, 0),
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn arithmetic_matches_wide_integers(a in any::<u64>(), b in any::<u64>(), e in any::<u64>()) {
        for p in [13u64, 8641, 65521] {
            agrees::<u16>(p, a, b, e)?;
        }
        for p in [8641u64, 2_147_483_647, 4_294_967_291] {
            agrees::<u32>(p, a, b, e)?;
        }
        for p in [8641u64, 4_294_967_291, 18_446_744_073_709_551_557] {
            agrees::<u64>(p, a, b, e)?;
        }
    }

    #[test]
    fn random_odd_primes(p in prime_below(1 << 16), a in any::<u64>(), b in any::<u64>(), e in 0u64..1 << 20) {
        agrees::<u16>(p, a, b, e)?;
        agrees::<u32>(p, a, b, e)?;
    }

    #[test]
    fn found_parameters_meet_their_contract(h in 1usize..40, w in 1usize..80, slack in 0u64..3000) {
        let bound = (h * w) as u64 + slack;
        let params = GfParams::<u32>::find(h, w, bound).unwrap();
        let p = params.p() as u64;
        let step = (h * w) as u64 / gcd(h as u64, w as u64);
        prop_assert!(is_prime(p) && p > bound && p % step == 1);
        prop_assert!((step + 1..p).step_by(step as usize).all(|q| !is_prime(q) || q <= bound));
        let f = params.field();
        prop_assert!(f.has_order(params.alpha(), h as u64));
        prop_assert!(f.has_order(params.beta(), w as u64));
        prop_assert!(GfParams::<u32>::validate(p, params.alpha() as u64, params.beta() as u64, h, w).is_ok());
    }
}
