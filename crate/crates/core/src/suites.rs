//! Self-checks run from the command line: oracle equalities for the matching
//! and index algebra, and the secrecy mechanics (parameter uniqueness,
//! uniformity, unlinkability, equation counts).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::cirf::oracle::{brute_corr, brute_corr_full, brute_min_hamming};
use crate::cirf::{
    correlation_window, match_correlation, min_hamming_score, random_filter, recover_template_filter, revoke,
    transform_query, transform_template, BioImage, ShiftWindow, TemplateParam, TransformedQuery, TransformedTemplate,
};
use crate::error::Result;
use crate::gf::{Axis, NttEngine, Word};
use crate::identify::{audit, AuditRow, Scenario};
use crate::index::{
    approx_score_from_products, compute_m, mst_recover_products, recover_index_params, transform_index_enroll,
    AnchorParam, IndexParam, IndexProducts, QueryIndexSpectra,
};
use crate::lowrank::{ensure_zero_free_spectra, FactorIndex};

/// One named pass/fail line.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }
}

fn random_binary<R: Rng>(rng: &mut R, h: usize, w: usize, density: f64) -> BioImage {
    BioImage::from_fn(h, w, |_, _| rng.gen_bool(density) as u16)
}

fn random_factor_index<R: Rng>(rng: &mut R, h: usize, w: usize, k: usize) -> FactorIndex {
    let a = (0..k).map(|_| (0..h).map(|_| rng.gen_bool(0.4) as u16).collect()).collect();
    let b = (0..k).map(|_| (0..w).map(|_| rng.gen_bool(0.4) as u16).collect()).collect();
    FactorIndex::new(h, w, a, b).expect("consistent shapes")
}

/// Largest window that fits the geometry, capped at `want`.
pub fn fitted_window(want: ShiftWindow, h: usize, w: usize) -> ShiftWindow {
    ShiftWindow::new(want.di_max.min((h - 1) / 2), want.dj_max.min((w - 1) / 2))
}

/// Every oracle-equality suite over `trials` random instances.
pub fn verify_suites<W: Word>(engine: &NttEngine<W>, k: usize, seed: u64, trials: usize) -> Result<Vec<Check>> {
    let (h, w) = engine.shape();
    let field = engine.field();
    let exact = fitted_window(ShiftWindow::EXACT, h, w);
    let approx = fitted_window(ShiftWindow::APPROX, h, w);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    let mut bad = 0;
    for _ in 0..trials {
        let x = random_binary(&mut rng, h, w, 0.3);
        let y = random_binary(&mut rng, h, w, 0.3);
        let r = random_filter(engine.params(), &mut rng);
        let r2 = random_filter(engine.params(), &mut rng);
        let c = match_correlation(engine, &transform_template(engine, &x, &r)?, &transform_query(engine, &y, &r)?)?;
        let c2 = match_correlation(engine, &transform_template(engine, &x, &r2)?, &transform_query(engine, &y, &r2)?)?;
        if correlation_window(engine, &c, exact)? != brute_corr(&x, &y, exact) || c != c2 {
            bad += 1;
        }
    }
    checks.push(Check::new("correlation", bad == 0, format!("{bad}/{trials} mismatches over {} shifts", exact.len())));

    let mut bad = 0;
    for _ in 0..trials {
        let x = random_binary(&mut rng, h, w, 0.3).zero_padded(exact);
        let y = random_binary(&mut rng, h, w, 0.3);
        let param = TemplateParam::random(engine.params(), &mut rng);
        let t = TransformedTemplate::new(engine, &x, &param)?;
        let v = TransformedQuery::new(engine, &y, &param)?;
        if min_hamming_score(engine, &t, &v, exact)? != brute_min_hamming(&x, &y, exact) {
            bad += 1;
        }
    }
    checks.push(Check::new("min-hamming", bad == 0, format!("{bad}/{trials} mismatches")));

    let (mut bad_m, mut bad_prod) = (0, 0);
    for _ in 0..trials {
        let records = 5;
        let ap = AnchorParam::random(engine.params(), &mut rng);
        let y = ensure_zero_free_spectra(random_factor_index(&mut rng, h, w, k), engine)?;
        let spectra = QueryIndexSpectra::new(engine, &y)?;
        let mut xs = Vec::new();
        let (mut ts, mut vs) = (Vec::new(), Vec::new());
        for n in 0..records {
            let mut x = random_factor_index(&mut rng, h, w, k);
            if n == 0 {
                x = ensure_zero_free_spectra(x, engine)?;
            }
            let rp = IndexParam::random(engine.params(), k, &mut rng);
            let anchor = (n == 0).then_some(&ap);
            ts.push(transform_index_enroll(engine, &x, &rp, anchor)?);
            vs.push(spectra.protect(field, &rp, anchor)?);
            xs.push(x);
        }
        let products = mst_recover_products(field, &ts, &vs, 0)?;
        let map = engine.shift_map();
        for (x, prod) in xs.iter().zip(&products) {
            if *prod != IndexProducts::direct(engine, x, &y)? {
                bad_prod += 1;
            }
            let m = compute_m(engine, prod)?;
            let full = brute_corr_full(&x.reconstruct_image(), &y.reconstruct_image());
            let agrees = (0..h * w).all(|q| {
                let (di, dj) = ((q / w) as isize, (q % w) as isize);
                m[map.coord(di, dj)].as_u64() == full[q]
            });
            if !agrees {
                bad_m += 1;
            }
        }
    }
    checks.push(Check::new("mst-recovery", bad_prod == 0, format!("{bad_prod}/{} records mismatched", trials * 5)));
    checks.push(Check::new("rank-correlation", bad_m == 0, format!("{bad_m}/{} records mismatched", trials * 5)));

    let mut bad = 0;
    for _ in 0..trials {
        let x = random_binary(&mut rng, h, w, 0.3);
        let [r1, r2, r3] = [0; 3].map(|_| random_filter(engine.params(), &mut rng));
        let t1 = transform_template(engine, &x, &r1)?;
        let direct = revoke(field, &t1, &r1, &r3)?;
        let twice = revoke(field, &revoke(field, &t1, &r1, &r2)?, &r2, &r3)?;
        if direct != transform_template(engine, &x, &r3)? || twice != direct || revoke(field, &t1, &r1, &r1)? != t1 {
            bad += 1;
        }
    }
    checks.push(Check::new("revocation", bad == 0, format!("{bad}/{trials} mismatches")));

    let x = random_binary(&mut rng, h, w, 0.3).zero_padded(exact);
    let param = TemplateParam::random(engine.params(), &mut rng);
    let t = TransformedTemplate::new(engine, &x, &param)?;
    let v = TransformedQuery::new(engine, &x, &param)?;
    let before = engine.counter().get();
    min_hamming_score(engine, &t, &v, exact)?;
    let exact_cost = engine.counter().get() - before;
    let idx = ensure_zero_free_spectra(random_factor_index(&mut rng, h, w, k), engine)?;
    let prod = IndexProducts::direct(engine, &idx, &idx)?;
    let before = engine.counter().get();
    approx_score_from_products(engine, &prod, approx)?;
    let approx_cost = engine.counter().get() - before;
    let (want_e, want_a) = (2 * (h + w) as u64, 2 * (k * k) as u64);
    checks.push(Check::new(
        "inverse-transform-count",
        exact_cost == want_e && approx_cost == want_a,
        format!("exact {exact_cost} (want {want_e}), approximate {approx_cost} (want {want_a})"),
    ));
    Ok(checks)
}

#[derive(Clone, Debug)]
pub struct SecrecyConfig {
    pub seed: u64,
    pub k: usize,
    pub bijection_trials: usize,
    pub samples: usize,
    /// Pixel positions tested per vector class.
    pub positions: usize,
    pub unlink_trials: usize,
    pub significance: f64,
}

impl Default for SecrecyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            k: 2,
            bijection_trials: 1000,
            samples: 100_000,
            positions: 4,
            unlink_trials: 20,
            significance: 0.001,
        }
    }
}

/// Chi-square test of one sampled pixel against the uniform law on `ℤ_p^*`.
#[derive(Clone, Debug, PartialEq)]
pub struct Uniformity {
    pub class: String,
    pub position: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub zeros: usize,
}

#[derive(Clone, Debug)]
pub struct SecrecyReport {
    pub checks: Vec<Check>,
    pub uniformity: Vec<Uniformity>,
    /// Two-sided p-values of the per-trial correlation tests.
    pub unlink_p_values: Vec<f64>,
    pub audit: Vec<AuditRow>,
}

impl SecrecyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Chi-square goodness of fit of `values` to the uniform law on `1..p`.
pub fn chi_square_units(values: &[u64], p: u64) -> (f64, f64, usize) {
    let mut counts = vec![0u64; p as usize];
    for &v in values {
        counts[v as usize] += 1;
    }
    let zeros = counts[0] as usize;
    let expected = values.len() as f64 / (p - 1) as f64;
    let stat: f64 = counts[1..].iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    let dist = ChiSquared::new((p - 2) as f64).expect("positive degrees of freedom");
    (stat, dist.sf(stat), zeros)
}

/// Two-sided p-value of the Pearson correlation between `a` and `b` under
/// independence, via the normal approximation `r·sqrt(n) ~ N(0, 1)`.
pub fn correlation_p_value(a: &[u64], b: &[u64]) -> f64 {
    let n = a.len() as f64;
    let mean = |v: &[u64]| v.iter().sum::<u64>() as f64 / n;
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x as f64 - ma, y as f64 - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let r = sab / (saa * sbb).sqrt();
    let z = (r * n.sqrt()).abs();
    2.0 * Normal::standard().sf(z)
}

fn zero_free_image<W: Word, R: Rng>(engine: &NttEngine<W>, rng: &mut R) -> Result<BioImage> {
    let (h, w) = engine.shape();
    loop {
        let x = random_binary(rng, h, w, 0.3);
        if engine.ntt2d(&x.to_matrix(engine.field())?)?.first_zero().is_none() {
            return Ok(x);
        }
    }
}

pub fn secrecy_suites<W: Word>(engine: &NttEngine<W>, cfg: &SecrecyConfig) -> Result<SecrecyReport> {
    let (h, w) = engine.shape();
    let p = engine.field().modulus().as_u64();
    let k = cfg.k;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = Vec::new();

    let (mut bad_t, mut bad_i) = (0, 0);
    for _ in 0..cfg.bijection_trials {
        let x = zero_free_image(engine, &mut rng)?;
        let r = random_filter(engine.params(), &mut rng);
        let t = transform_template(engine, &x, &r)?;
        let found = recover_template_filter(engine, &x, &t)?;
        if found != r || transform_template(engine, &x, &found)? != t {
            bad_t += 1;
        }
        let idx = ensure_zero_free_spectra(random_factor_index(&mut rng, h, w, k), engine)?;
        let rp = IndexParam::random(engine.params(), k, &mut rng);
        let ap = AnchorParam::random(engine.params(), &mut rng);
        let ti = transform_index_enroll(engine, &idx, &rp, Some(&ap))?;
        let (rp2, ap2) = recover_index_params(engine, &idx, &ti)?;
        let again = ap2.as_ref().map(|a| transform_index_enroll(engine, &idx, &rp2, Some(a)));
        if rp2 != rp || ap2.as_ref() != Some(&ap) || !matches!(again, Some(Ok(ref t2)) if *t2 == ti) {
            bad_i += 1;
        }
    }
    let n = cfg.bijection_trials;
    checks.push(Check::new("template-parameter-uniqueness", bad_t == 0, format!("{bad_t}/{n} failures")));
    checks.push(Check::new("index-parameter-uniqueness", bad_i == 0, format!("{bad_i}/{n} failures")));

    // Sample every stored vector class under fresh filters with the
    // plaintext fixed.
    let pad = fitted_window(ShiftWindow::EXACT, h, w);
    let zero_free = |m: &BioImage| -> Result<bool> { Ok(engine.ntt2d(&m.to_matrix(engine.field())?)?.first_zero().is_none()) };
    let x = loop {
        let x = random_binary(&mut rng, h, w, 0.3).zero_padded(pad);
        if zero_free(&x)? && zero_free(&x.complement()?)? {
            break x;
        }
    };
    let idx = ensure_zero_free_spectra(random_factor_index(&mut rng, h, w, k), engine)?;
    let positions = |len: usize, rng: &mut ChaCha8Rng| -> Vec<usize> {
        (0..cfg.positions).map(|_| rng.gen_range(0..len)).collect()
    };
    let mut classes: Vec<(String, Vec<usize>)> = vec![
        ("template".into(), positions(h * w, &mut rng)),
        ("template-complement".into(), positions(h * w, &mut rng)),
    ];
    for i in 0..k {
        classes.push((format!("index-alpha-{}", i + 1), positions(h, &mut rng)));
        classes.push((format!("index-beta-{}", i + 1), positions(w, &mut rng)));
    }
    classes.push(("anchor-alpha".into(), positions(h, &mut rng)));
    classes.push(("anchor-beta".into(), positions(w, &mut rng)));
    let mut samples: Vec<Vec<Vec<u64>>> =
        classes.iter().map(|(_, pos)| vec![Vec::with_capacity(cfg.samples); pos.len()]).collect();
    // T = F(X) ∘ R, so the spectra are computed once and only the filters vary.
    let fx = engine.ntt2d(&x.to_matrix(engine.field())?)?;
    let fx_bar = engine.ntt2d(&x.complement()?.to_matrix(engine.field())?)?;
    for _ in 0..cfg.samples {
        let param = TemplateParam::random(engine.params(), &mut rng);
        let t = TransformedTemplate::from_parts(
            fx.hadamard(param.r1(), engine.field())?,
            fx_bar.hadamard(param.r2(), engine.field())?,
        )?;
        let rp = IndexParam::random(engine.params(), k, &mut rng);
        let ap = AnchorParam::random(engine.params(), &mut rng);
        let ti = transform_index_enroll(engine, &idx, &rp, Some(&ap))?;
        let mut vectors: Vec<&[W]> = vec![t.t().as_slice(), t.t_bar().as_slice()];
        for i in 0..k {
            vectors.push(&ti.vectors(Axis::Height)[i]);
            vectors.push(&ti.vectors(Axis::Width)[i]);
        }
        vectors.push(ti.anchor(Axis::Height).expect("anchor record"));
        vectors.push(ti.anchor(Axis::Width).expect("anchor record"));
        for ((c, (_, pos)), v) in samples.iter_mut().zip(&classes).zip(vectors) {
            for (slot, &q) in c.iter_mut().zip(pos) {
                slot.push(v[q].as_u64());
            }
        }
    }
    let mut uniformity = Vec::new();
    for ((class, pos), s) in classes.iter().zip(&samples) {
        for (&position, values) in pos.iter().zip(s) {
            let (statistic, p_value, zeros) = chi_square_units(values, p);
            uniformity.push(Uniformity { class: class.clone(), position, statistic, p_value, zeros });
        }
    }
    let worst = uniformity.iter().map(|u| u.p_value).fold(1.0, f64::min);
    let zeros: usize = uniformity.iter().map(|u| u.zeros).sum();
    checks.push(Check::new(
        "uniformity",
        zeros == 0 && worst > cfg.significance,
        format!("{} pixels, smallest p-value {worst:.4}, zero outputs {zeros}", uniformity.len()),
    ));

    let mut unlink_p_values = Vec::new();
    for _ in 0..cfg.unlink_trials {
        let x = random_binary(&mut rng, h, w, 0.3);
        let a = transform_template(engine, &x, &random_filter(engine.params(), &mut rng))?;
        let b = transform_template(engine, &x, &random_filter(engine.params(), &mut rng))?;
        let pick = |m: &crate::gf::GfMatrix<W>| m.as_slice().iter().map(|v| v.as_u64()).collect::<Vec<_>>();
        unlink_p_values.push(correlation_p_value(&pick(&a), &pick(&b)));
    }
    let worst = unlink_p_values.iter().copied().fold(1.0, f64::min);
    let bound = cfg.significance / cfg.unlink_trials.max(1) as f64;
    checks.push(Check::new(
        "unlinkability",
        worst > bound,
        format!("{} pairs, smallest p-value {worst:.4} (bound {bound:.1e})", cfg.unlink_trials),
    ));

    let mut rows = Vec::new();
    for scenario in [Scenario::Individual, Scenario::Common] {
        for n in [1, 10, 1000] {
            rows.push(audit(scenario, n, h as u64, w as u64, k as u64));
        }
    }
    let failing = rows.iter().filter(|r| !r.holds()).count();
    checks.push(Check::new("equation-audit", failing == 0, format!("{failing}/{} rows violate", rows.len())));
    Ok(SecrecyReport { checks, uniformity, unlink_p_values, audit: rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::GfParams;

    #[test]
    fn verify_passes_on_small_geometry() {
        let engine = NttEngine::<u32>::new(GfParams::find(8, 16, 4 * 8 * 16).unwrap());
        for k in [1, 2] {
            let checks = verify_suites(&engine, k, 3, 5).unwrap();
            assert!(checks.iter().all(|c| c.passed), "{checks:?}");
        }
    }

    #[test]
    fn secrecy_passes_on_small_geometry() {
        let engine = NttEngine::<u32>::new(GfParams::find(8, 16, 4 * 8 * 16).unwrap());
        let cfg = SecrecyConfig { bijection_trials: 20, samples: 20_000, unlink_trials: 5, ..SecrecyConfig::default() };
        let report = secrecy_suites(&engine, &cfg).unwrap();
        assert!(report.passed(), "{:?}", report.checks);
        assert_eq!(report.audit.len(), 6);
    }

    #[test]
    fn chi_square_detects_bias() {
        let p = 13;
        let uniform: Vec<u64> = (0..1200).map(|i| 1 + i % 12).collect();
        assert!(chi_square_units(&uniform, p).1 > 0.99);
        let biased: Vec<u64> = (0..1200).map(|i| 1 + (i % 12) / 2).collect();
        assert!(chi_square_units(&biased, p).1 < 1e-6);
    }

    #[test]
    fn correlated_vectors_are_flagged() {
        let a: Vec<u64> = (0..2000).map(|i| (i * 7919) % 8641).collect();
        assert!(correlation_p_value(&a, &a) < 1e-9);
    }
}
