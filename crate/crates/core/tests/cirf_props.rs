use cirf_core::cirf::{
    brute_corr, brute_min_hamming, correlation_window, match_correlation, min_hamming_score, random_filter,
    recover_template_filter, revoke, transform_query, transform_template, BioImage, ShiftWindow, TemplateParam,
    TransformedQuery, TransformedTemplate,
};
use cirf_core::gf::{GfParams, NttEngine};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const H: usize = 8;
const W: usize = 16;
const WIN: ShiftWindow = ShiftWindow::new(2, 3);

fn engine() -> NttEngine<u32> {
    NttEngine::new(GfParams::find(H, W, (H * W) as u64).unwrap())
}

fn image() -> impl Strategy<Value = BioImage> {
    prop::collection::vec(prop::bool::weighted(0.35), H * W)
        .prop_map(|b| BioImage::new(H, W, b.into_iter().map(u16::from).collect()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn filters_cancel_in_correlation(x in image(), y in image(), seed in any::<u64>()) {
        let e = engine();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = random_filter(e.params(), &mut rng);
        let c = match_correlation(&e, &transform_template(&e, &x, &r).unwrap(), &transform_query(&e, &y, &r).unwrap())
            .unwrap();
        prop_assert_eq!(correlation_window(&e, &c, WIN).unwrap(), brute_corr(&x, &y, WIN));
    }

    #[test]
    fn min_hamming_matches_plaintext(x in image(), y in image(), seed in any::<u64>()) {
        let e = engine();
        let x = x.zero_padded(WIN);
        let param = TemplateParam::random(e.params(), &mut ChaCha8Rng::seed_from_u64(seed));
        let t = TransformedTemplate::new(&e, &x, &param).unwrap();
        let v = TransformedQuery::new(&e, &y, &param).unwrap();
        e.counter().reset();
        prop_assert_eq!(min_hamming_score(&e, &t, &v, WIN).unwrap(), brute_min_hamming(&x, &y, WIN));
        prop_assert_eq!(e.counter().get(), 2 * (H + W) as u64);
    }

    #[test]
    fn filter_is_recovered_uniquely(x in image(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let e = engine();
        let fx = e.ntt2d(&x.to_matrix(e.field()).unwrap()).unwrap();
        prop_assume!(fx.first_zero().is_none());
        let r1 = random_filter(e.params(), &mut ChaCha8Rng::seed_from_u64(s1));
        let r2 = random_filter(e.params(), &mut ChaCha8Rng::seed_from_u64(s2));
        let t1 = transform_template(&e, &x, &r1).unwrap();
        let t2 = transform_template(&e, &x, &r2).unwrap();
        prop_assert_eq!(recover_template_filter(&e, &x, &t1).unwrap(), r1.clone());
        prop_assert_eq!(r1 == r2, t1 == t2);
    }

    #[test]
    fn revocation_equals_fresh_enrollment(x in image(), y in image(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let e = engine();
        let f = e.field();
        let r_old = random_filter(e.params(), &mut ChaCha8Rng::seed_from_u64(s1));
        let r_new = random_filter(e.params(), &mut ChaCha8Rng::seed_from_u64(s2));
        let t_old = transform_template(&e, &x, &r_old).unwrap();
        prop_assert_eq!(revoke(f, &t_old, &r_old, &r_new).unwrap(), transform_template(&e, &x, &r_new).unwrap());

        let x = x.zero_padded(WIN);
        let old = TemplateParam::random(e.params(), &mut ChaCha8Rng::seed_from_u64(s1));
        let new = TemplateParam::random(e.params(), &mut ChaCha8Rng::seed_from_u64(s2 ^ 1));
        let revoked = TransformedTemplate::new(&e, &x, &old).unwrap().revoke(f, &old, &new).unwrap();
        prop_assert_eq!(&revoked, &TransformedTemplate::new(&e, &x, &new).unwrap());
        let v_new = TransformedQuery::new(&e, &y, &new).unwrap();
        prop_assert_eq!(min_hamming_score(&e, &revoked, &v_new, WIN).unwrap(), brute_min_hamming(&x, &y, WIN));
    }
}
