use rand::Rng;

use super::image::{BioImage, ShiftTable, ShiftWindow};
use crate::error::{Error, Result};
use crate::gf::{Field, GfMatrix, GfParams, NttEngine, Word};

fn ensure_zero_free<W: Word>(r: &GfMatrix<W>) -> Result<()> {
    match r.first_zero() {
        None => Ok(()),
        Some(index) => Err(Error::ZeroFilterEntry { index }),
    }
}

/// Uniform random filter over `(ℤ_p^*)^{h x w}`.
pub fn random_filter<W: Word, R: Rng + ?Sized>(params: &GfParams<W>, rng: &mut R) -> GfMatrix<W> {
    let (h, w) = params.shape();
    let data = params.field().random_units(h * w, rng);
    GfMatrix::from_vec(h, w, data).expect("length matches")
}

/// `T = F(X) ∘ r`.
pub fn transform_template<W: Word>(engine: &NttEngine<W>, x: &BioImage, r: &GfMatrix<W>) -> Result<GfMatrix<W>> {
    r.ensure_shape(engine.shape())?;
    ensure_zero_free(r)?;
    let fx = engine.ntt2d(&x.to_matrix(engine.field())?)?;
    fx.hadamard(r, engine.field())
}

/// `V = F(flip(Y)) ∘ r⁻¹`.
pub fn transform_query<W: Word>(engine: &NttEngine<W>, y: &BioImage, r: &GfMatrix<W>) -> Result<GfMatrix<W>> {
    r.ensure_shape(engine.shape())?;
    ensure_zero_free(r)?;
    let fy = engine.ntt2d(&y.flip().to_matrix(engine.field())?)?;
    fy.hadamard(&r.hadamard_inv(engine.field())?, engine.field())
}

/// Inverse transform of `T ∘ V`: the cyclic cross-correlation of the
/// underlying images, laid out per the engine's [`ShiftMap`](crate::gf::ShiftMap).
pub fn match_correlation<W: Word>(engine: &NttEngine<W>, t: &GfMatrix<W>, v: &GfMatrix<W>) -> Result<GfMatrix<W>> {
    t.ensure_shape(engine.shape())?;
    engine.intt2d(&t.hadamard(v, engine.field())?)
}

/// Reads the `(2·di_max+1) x (2·dj_max+1)` shift table out of a correlation matrix.
pub fn correlation_window<W: Word>(engine: &NttEngine<W>, c: &GfMatrix<W>, win: ShiftWindow) -> Result<ShiftTable> {
    c.ensure_shape(engine.shape())?;
    let (h, w) = engine.shape();
    win.check(h, w)?;
    let map = engine.shift_map();
    Ok(ShiftTable::from_fn(win, |di, dj| c[map.coord(di, dj)].as_u64()))
}

/// `T_new = T ∘ r_new ∘ r_old⁻¹`, re-keying a template without the image.
pub fn revoke<W: Word>(field: &Field<W>, t: &GfMatrix<W>, r_old: &GfMatrix<W>, r_new: &GfMatrix<W>) -> Result<GfMatrix<W>> {
    ensure_zero_free(r_old)?;
    ensure_zero_free(r_new)?;
    r_old.ensure_shape(t.shape())?;
    t.hadamard(&r_new.hadamard(&r_old.hadamard_inv(field)?, field)?, field)
}

/// The unique filter mapping `x` to `t`, `r = T ∘ F(X)⁻¹`. Requires a zero-free
/// spectrum of `x`.
pub fn recover_template_filter<W: Word>(engine: &NttEngine<W>, x: &BioImage, t: &GfMatrix<W>) -> Result<GfMatrix<W>> {
    let fx = engine.ntt2d(&x.to_matrix(engine.field())?)?;
    t.hadamard(&fx.hadamard_inv(engine.field())?, engine.field())
}

/// Filter pair for the minimum-Hamming scheme: `r1` keys `X` (and `Ȳ`),
/// `r2` keys `X̄` (and `Y`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateParam<W: Word> {
    r1: GfMatrix<W>,
    r2: GfMatrix<W>,
}

impl<W: Word> TemplateParam<W> {
    pub fn random<R: Rng + ?Sized>(params: &GfParams<W>, rng: &mut R) -> Self {
        Self { r1: random_filter(params, rng), r2: random_filter(params, rng) }
    }

    pub fn from_filters(r1: GfMatrix<W>, r2: GfMatrix<W>) -> Result<Self> {
        ensure_zero_free(&r1)?;
        ensure_zero_free(&r2)?;
        r2.ensure_shape(r1.shape())?;
        Ok(Self { r1, r2 })
    }

    pub fn r1(&self) -> &GfMatrix<W> {
        &self.r1
    }

    pub fn r2(&self) -> &GfMatrix<W> {
        &self.r2
    }
}

/// Server-side template for the minimum-Hamming scheme: `T = F_{R1}(X)`,
/// `T̄ = F_{R2}(X̄)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransformedTemplate<W: Word> {
    t: GfMatrix<W>,
    t_bar: GfMatrix<W>,
}

impl<W: Word> TransformedTemplate<W> {
    pub fn new(engine: &NttEngine<W>, x: &BioImage, param: &TemplateParam<W>) -> Result<Self> {
        Ok(Self {
            t: transform_template(engine, x, &param.r1)?,
            t_bar: transform_template(engine, &x.complement()?, &param.r2)?,
        })
    }

    pub fn from_parts(t: GfMatrix<W>, t_bar: GfMatrix<W>) -> Result<Self> {
        t_bar.ensure_shape(t.shape())?;
        Ok(Self { t, t_bar })
    }

    pub fn t(&self) -> &GfMatrix<W> {
        &self.t
    }

    pub fn t_bar(&self) -> &GfMatrix<W> {
        &self.t_bar
    }

    /// Re-keys both halves.
    pub fn revoke(&self, field: &Field<W>, old: &TemplateParam<W>, new: &TemplateParam<W>) -> Result<Self> {
        Ok(Self {
            t: revoke(field, &self.t, &old.r1, &new.r1)?,
            t_bar: revoke(field, &self.t_bar, &old.r2, &new.r2)?,
        })
    }
}

/// Filter-independent query spectra `F(flip(Y))` and `F(flip(Ȳ))`, computed
/// once and re-keyed per record.
#[derive(Clone, Debug)]
pub struct QuerySpectrum<W: Word> {
    fy: GfMatrix<W>,
    fy_bar: GfMatrix<W>,
}

impl<W: Word> QuerySpectrum<W> {
    pub fn new(engine: &NttEngine<W>, y: &BioImage) -> Result<Self> {
        let field = engine.field();
        Ok(Self {
            fy: engine.ntt2d(&y.flip().to_matrix(field)?)?,
            fy_bar: engine.ntt2d(&y.complement()?.flip().to_matrix(field)?)?,
        })
    }

    /// `V = G_{R2}(Y)`, `V̄ = G_{R1}(Ȳ)`.
    pub fn protect(&self, field: &Field<W>, param: &TemplateParam<W>) -> Result<TransformedQuery<W>> {
        Ok(TransformedQuery {
            v: self.fy.hadamard(&param.r2.hadamard_inv(field)?, field)?,
            v_bar: self.fy_bar.hadamard(&param.r1.hadamard_inv(field)?, field)?,
        })
    }
}

/// Query for the minimum-Hamming scheme: `V = G_{R2}(Y)`, `V̄ = G_{R1}(Ȳ)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransformedQuery<W: Word> {
    v: GfMatrix<W>,
    v_bar: GfMatrix<W>,
}

impl<W: Word> TransformedQuery<W> {
    pub fn new(engine: &NttEngine<W>, y: &BioImage, param: &TemplateParam<W>) -> Result<Self> {
        QuerySpectrum::new(engine, y)?.protect(engine.field(), param)
    }

    pub fn v(&self) -> &GfMatrix<W> {
        &self.v
    }

    pub fn v_bar(&self) -> &GfMatrix<W> {
        &self.v_bar
    }
}

/// Minimum over the window of `(X̄ ⋆ Y) + (X ⋆ Ȳ)`, i.e. the fewest mismatched
/// feature pixels over all allowed shifts. Costs two 2D inverse transforms.
pub fn min_hamming_score<W: Word>(
    engine: &NttEngine<W>,
    template: &TransformedTemplate<W>,
    query: &TransformedQuery<W>,
    win: ShiftWindow,
) -> Result<u64> {
    let (h, w) = engine.shape();
    win.check(h, w)?;
    let xbar_y = match_correlation(engine, &template.t_bar, &query.v)?;
    let x_ybar = match_correlation(engine, &template.t, &query.v_bar)?;
    let map = engine.shift_map();
    Ok(win
        .shifts()
        .map(|(di, dj)| {
            let c = map.coord(di, dj);
            xbar_y[c].as_u64() + x_ybar[c].as_u64()
        })
        .min()
        .expect("window is nonempty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cirf::oracle::brute_corr;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn engine() -> NttEngine<u32> {
        NttEngine::new(GfParams::reference())
    }

    fn random_binary(rng: &mut ChaCha8Rng, h: usize, w: usize) -> BioImage {
        BioImage::from_fn(h, w, |_, _| rng.gen_bool(0.3) as u16)
    }

    #[test]
    fn identity_filter_gives_plain_spectrum() {
        let e = engine();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_binary(&mut rng, 32, 64);
        let ones = GfMatrix::filled(32, 64, 1u32);
        let fx = e.ntt2d(&x.to_matrix(e.field()).unwrap()).unwrap();
        assert_eq!(transform_template(&e, &x, &ones).unwrap(), fx);
        let fy = e.ntt2d(&x.flip().to_matrix(e.field()).unwrap()).unwrap();
        assert_eq!(transform_query(&e, &x, &ones).unwrap(), fy);
        let r = random_filter(e.params(), &mut rng);
        assert_eq!(transform_template(&e, &BioImage::zeros(32, 64), &r).unwrap(), GfMatrix::zeros(32, 64));
        assert_eq!(transform_query(&e, &BioImage::zeros(32, 64), &r).unwrap(), GfMatrix::zeros(32, 64));
    }

    #[test]
    fn zero_filter_rejected() {
        let e = engine();
        let mut r = GfMatrix::filled(32, 64, 1u32);
        r[(3, 5)] = 0;
        let x = BioImage::zeros(32, 64);
        assert!(matches!(transform_template(&e, &x, &r), Err(Error::ZeroFilterEntry { index: 197 })));
        assert!(transform_query(&e, &x, &r).is_err());
    }

    #[test]
    fn delta_autocorrelation() {
        let e = engine();
        let mut x = BioImage::zeros(32, 64);
        x.set(16, 32, 1);
        let r = random_filter(e.params(), &mut ChaCha8Rng::seed_from_u64(2));
        let c = match_correlation(&e, &transform_template(&e, &x, &r).unwrap(), &transform_query(&e, &x, &r).unwrap()).unwrap();
        let table = correlation_window(&e, &c, ShiftWindow::EXACT).unwrap();
        assert_eq!(table.get(0, 0), 1);
        assert_eq!(table.values().iter().sum::<u64>(), 1);
        assert_eq!(c.as_slice().iter().filter(|&&v| v != 0).count(), 1);
    }

    #[test]
    fn zero_window_is_plain_inner_product() {
        let e = engine();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_binary(&mut rng, 32, 64);
        let y = random_binary(&mut rng, 32, 64);
        let r = random_filter(e.params(), &mut rng);
        let c = match_correlation(&e, &transform_template(&e, &x, &r).unwrap(), &transform_query(&e, &y, &r).unwrap()).unwrap();
        let table = correlation_window(&e, &c, ShiftWindow::new(0, 0)).unwrap();
        let dot: u64 = x.pixels().iter().zip(y.pixels()).map(|(&a, &b)| (a * b) as u64).sum();
        assert_eq!(table.values(), &[dot]);
        assert!(correlation_window(&e, &c, ShiftWindow::new(32, 1)).is_err());
    }

    #[test]
    fn filter_cancels_in_matching() {
        let e = engine();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_binary(&mut rng, 32, 64);
        let y = random_binary(&mut rng, 32, 64);
        let r1 = random_filter(e.params(), &mut rng);
        let r2 = random_filter(e.params(), &mut rng);
        let ones = GfMatrix::filled(32, 64, 1u32);
        let m = |r: &GfMatrix<u32>| {
            match_correlation(&e, &transform_template(&e, &x, r).unwrap(), &transform_query(&e, &y, r).unwrap()).unwrap()
        };
        assert_eq!(m(&r1), m(&r2));
        assert_eq!(m(&r1), m(&ones));
        let table = correlation_window(&e, &m(&r1), ShiftWindow::new(2, 4)).unwrap();
        assert_eq!(table, brute_corr(&x, &y, ShiftWindow::new(2, 4)));
    }

    #[test]
    fn revocation_identities() {
        let e = engine();
        let f = e.field();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_binary(&mut rng, 32, 64);
        let rs: Vec<_> = (0..3).map(|_| random_filter(e.params(), &mut rng)).collect();
        let t1 = transform_template(&e, &x, &rs[0]).unwrap();
        assert_eq!(revoke(f, &t1, &rs[0], &rs[0]).unwrap(), t1);
        let t2 = revoke(f, &t1, &rs[0], &rs[1]).unwrap();
        assert_eq!(t2, transform_template(&e, &x, &rs[1]).unwrap());
        let t3 = revoke(f, &t2, &rs[1], &rs[2]).unwrap();
        assert_eq!(t3, revoke(f, &t1, &rs[0], &rs[2]).unwrap());
        let mut bad = rs[1].clone();
        bad[(0, 0)] = 0;
        assert!(revoke(f, &t1, &rs[0], &bad).is_err());
    }

    #[test]
    fn hamming_trivial_cases_and_cost() {
        let e = engine();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let param = TemplateParam::random(e.params(), &mut rng);
        let x = random_binary(&mut rng, 32, 64).zero_padded(ShiftWindow::EXACT);
        let tmpl = TransformedTemplate::new(&e, &x, &param).unwrap();
        let before = e.counter().get();
        let same = TransformedQuery::new(&e, &x, &param).unwrap();
        assert_eq!(min_hamming_score(&e, &tmpl, &same, ShiftWindow::EXACT).unwrap(), 0);
        assert_eq!(e.counter().get() - before, 2 * (32 + 64));

        let ones = BioImage::from_fn(32, 64, |_, _| 1).zero_padded(ShiftWindow::EXACT);
        let tmpl = TransformedTemplate::new(&e, &ones, &param).unwrap();
        let q = TransformedQuery::new(&e, &BioImage::zeros(32, 64), &param).unwrap();
        assert_eq!(min_hamming_score(&e, &tmpl, &q, ShiftWindow::new(0, 0)).unwrap(), 20 * 40);
    }

    #[test]
    fn filter_recovery_is_unique_preimage() {
        let e = engine();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut x = random_binary(&mut rng, 32, 64);
        x.set(0, 0, 1);
        let r = random_filter(e.params(), &mut rng);
        let t = transform_template(&e, &x, &r).unwrap();
        let fx = e.ntt2d(&x.to_matrix(e.field()).unwrap()).unwrap();
        if fx.first_zero().is_none() {
            assert_eq!(recover_template_filter(&e, &x, &t).unwrap(), r);
        }
    }
}
