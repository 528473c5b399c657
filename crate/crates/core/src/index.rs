//! Cancelable index: filtered 1D spectra of the factor columns, recovery of
//! every cross product through the anchor record, and the rank-k correlation
//! `M = X̂ ⋆ Ŷ` from `2k²` inverse 1D transforms.

use rand::Rng;

use crate::cirf::ShiftWindow;
use crate::error::{Error, Result};
use crate::gf::{hadamard, hadamard_inv, Axis, Field, GfMatrix, GfParams, NttEngine, Word};
use crate::lowrank::FactorIndex;

fn ensure_zero_free<W: Word>(v: &[W]) -> Result<()> {
    match v.iter().position(|x| x.is_zero()) {
        None => Ok(()),
        Some(index) => Err(Error::ZeroFilterEntry { index }),
    }
}

fn check_lengths<W>(cols: &[Vec<W>], len: usize) -> Result<()> {
    for c in cols {
        if c.len() != len {
            return Err(Error::LengthMismatch { expected: len, found: c.len() });
        }
    }
    Ok(())
}

fn lift<W: Word>(field: &Field<W>, col: &[u16]) -> Vec<W> {
    col.iter().map(|&v| field.reduce_u64(v as u64)).collect()
}

/// `G(x)`, or `G(flip(x))` with `flip(x)[j] = x[n-1-j]`.
fn spectrum<W: Word>(engine: &NttEngine<W>, col: &[u16], axis: Axis, flip: bool) -> Result<Vec<W>> {
    let mut v = lift(engine.field(), col);
    if flip {
        v.reverse();
    }
    engine.ntt1d(&v, axis)
}

fn axis_len<W: Word>(params: &GfParams<W>, axis: Axis) -> usize {
    match axis {
        Axis::Height => params.h(),
        Axis::Width => params.w(),
    }
}

/// Per-record index filters `r_αi` (length `h`) and `r_βi` (length `w`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexParam<W: Word> {
    r_alpha: Vec<Vec<W>>,
    r_beta: Vec<Vec<W>>,
}

impl<W: Word> IndexParam<W> {
    pub fn random<R: Rng + ?Sized>(params: &GfParams<W>, k: usize, rng: &mut R) -> Self {
        let f = params.field();
        let r_alpha = (0..k).map(|_| f.random_units(params.h(), rng)).collect();
        let r_beta = (0..k).map(|_| f.random_units(params.w(), rng)).collect();
        Self { r_alpha, r_beta }
    }

    pub fn from_filters(r_alpha: Vec<Vec<W>>, r_beta: Vec<Vec<W>>) -> Result<Self> {
        if r_alpha.len() != r_beta.len() || r_alpha.is_empty() {
            return Err(Error::InvalidParameter("filter column counts must agree and be positive".into()));
        }
        for c in r_alpha.iter().chain(&r_beta) {
            ensure_zero_free(c)?;
        }
        Ok(Self { r_alpha, r_beta })
    }

    /// All-ones filters.
    pub fn identity(params: &GfParams<W>, k: usize) -> Self {
        Self { r_alpha: vec![vec![W::one(); params.h()]; k], r_beta: vec![vec![W::one(); params.w()]; k] }
    }

    pub fn k(&self) -> usize {
        self.r_alpha.len()
    }

    pub fn filters(&self, axis: Axis) -> &[Vec<W>] {
        match axis {
            Axis::Height => &self.r_alpha,
            Axis::Width => &self.r_beta,
        }
    }
}

/// The database-wide anchor filters `r'_α`, `r'_β`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnchorParam<W: Word> {
    r_alpha: Vec<W>,
    r_beta: Vec<W>,
}

impl<W: Word> AnchorParam<W> {
    pub fn random<R: Rng + ?Sized>(params: &GfParams<W>, rng: &mut R) -> Self {
        let f = params.field();
        Self { r_alpha: f.random_units(params.h(), rng), r_beta: f.random_units(params.w(), rng) }
    }

    pub fn from_filters(r_alpha: Vec<W>, r_beta: Vec<W>) -> Result<Self> {
        ensure_zero_free(&r_alpha)?;
        ensure_zero_free(&r_beta)?;
        Ok(Self { r_alpha, r_beta })
    }

    pub fn identity(params: &GfParams<W>) -> Self {
        Self { r_alpha: vec![W::one(); params.h()], r_beta: vec![W::one(); params.w()] }
    }

    pub fn filter(&self, axis: Axis) -> &[W] {
        match axis {
            Axis::Height => &self.r_alpha,
            Axis::Width => &self.r_beta,
        }
    }
}

/// Stored index of one record: `t_αi = G(x_αi) ∘ r_αi`, `t_βi = G(x_βi) ∘ r_βi`,
/// plus `(t'_α, t'_β)` on the anchor record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransformedIndex<W: Word> {
    t_alpha: Vec<Vec<W>>,
    t_beta: Vec<Vec<W>>,
    anchor_t: Option<(Vec<W>, Vec<W>)>,
}

impl<W: Word> TransformedIndex<W> {
    pub fn from_parts(t_alpha: Vec<Vec<W>>, t_beta: Vec<Vec<W>>, anchor_t: Option<(Vec<W>, Vec<W>)>) -> Result<Self> {
        if t_alpha.len() != t_beta.len() || t_alpha.is_empty() {
            return Err(Error::InvalidParameter("index column counts must agree and be positive".into()));
        }
        let (h, w) = (t_alpha[0].len(), t_beta[0].len());
        check_lengths(&t_alpha, h)?;
        check_lengths(&t_beta, w)?;
        if let Some((a, b)) = &anchor_t {
            check_lengths(std::slice::from_ref(a), h)?;
            check_lengths(std::slice::from_ref(b), w)?;
        }
        Ok(Self { t_alpha, t_beta, anchor_t })
    }

    pub fn k(&self) -> usize {
        self.t_alpha.len()
    }

    pub fn vectors(&self, axis: Axis) -> &[Vec<W>] {
        match axis {
            Axis::Height => &self.t_alpha,
            Axis::Width => &self.t_beta,
        }
    }

    pub fn anchor(&self, axis: Axis) -> Option<&[W]> {
        self.anchor_t.as_ref().map(|(a, b)| match axis {
            Axis::Height => a.as_slice(),
            Axis::Width => b.as_slice(),
        })
    }

    pub fn is_anchor(&self) -> bool {
        self.anchor_t.is_some()
    }

    /// Number of stored field elements.
    pub fn pixel_count(&self) -> usize {
        let per = |v: &[Vec<W>]| v.iter().map(Vec::len).sum::<usize>();
        per(&self.t_alpha) + per(&self.t_beta) + self.anchor_t.as_ref().map_or(0, |(a, b)| a.len() + b.len())
    }
}

/// Enrolls a plaintext index. With `anchor`, the record also carries
/// `t'_α = G(x_α1) ∘ r'_α` and `t'_β = G(x_β1) ∘ r'_β`; its first columns
/// must then have zero-free spectra.
pub fn transform_index_enroll<W: Word>(
    engine: &NttEngine<W>,
    idx: &FactorIndex,
    rp: &IndexParam<W>,
    anchor: Option<&AnchorParam<W>>,
) -> Result<TransformedIndex<W>> {
    let field = engine.field();
    if rp.k() != idx.k() {
        return Err(Error::LengthMismatch { expected: idx.k(), found: rp.k() });
    }
    let side = |axis: Axis| -> Result<Vec<Vec<W>>> {
        (0..idx.k())
            .map(|i| {
                let r = &rp.filters(axis)[i];
                ensure_zero_free(r)?;
                hadamard(field, &spectrum(engine, idx.column(axis, i), axis, false)?, r)
            })
            .collect()
    };
    let t_alpha = side(Axis::Height)?;
    let t_beta = side(Axis::Width)?;
    let anchor_t = match anchor {
        None => None,
        Some(ap) => {
            let one = |axis: Axis| -> Result<Vec<W>> {
                let g = spectrum(engine, idx.column(axis, 0), axis, false)?;
                if let Some(index) = g.iter().position(|v| v.is_zero()) {
                    return Err(Error::ZeroElement { index });
                }
                ensure_zero_free(ap.filter(axis))?;
                hadamard(field, &g, ap.filter(axis))
            };
            Some((one(Axis::Height)?, one(Axis::Width)?))
        }
    };
    Ok(TransformedIndex { t_alpha, t_beta, anchor_t })
}

/// Unfiltered query spectra `G(flip(y_αj))`, `G(flip(y_βj))`. Computed once
/// per query and re-keyed for each record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryIndexSpectra<W: Word> {
    alpha: Vec<Vec<W>>,
    beta: Vec<Vec<W>>,
}

impl<W: Word> QueryIndexSpectra<W> {
    pub fn new(engine: &NttEngine<W>, y_idx: &FactorIndex) -> Result<Self> {
        let side = |axis: Axis| -> Result<Vec<Vec<W>>> {
            (0..y_idx.k()).map(|j| spectrum(engine, y_idx.column(axis, j), axis, true)).collect()
        };
        Ok(Self { alpha: side(Axis::Height)?, beta: side(Axis::Width)? })
    }

    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    fn side(&self, axis: Axis) -> &[Vec<W>] {
        match axis {
            Axis::Height => &self.alpha,
            Axis::Width => &self.beta,
        }
    }

    /// `v_αj = G(flip(y_αj)) ∘ r_αj⁻¹` (and β), plus
    /// `v'_αj = G(flip(y_αj)) ∘ r'_α⁻¹` for `j >= 2` when `anchor` is given.
    pub fn protect(
        &self,
        field: &Field<W>,
        rp: &IndexParam<W>,
        anchor: Option<&AnchorParam<W>>,
    ) -> Result<TransformedQueryIndex<W>> {
        if rp.k() != self.k() {
            return Err(Error::LengthMismatch { expected: self.k(), found: rp.k() });
        }
        let keyed = |axis: Axis| -> Result<Vec<Vec<W>>> {
            self.side(axis)
                .iter()
                .zip(rp.filters(axis))
                .map(|(g, r)| {
                    ensure_zero_free(r)?;
                    hadamard(field, g, &hadamard_inv(field, r)?)
                })
                .collect()
        };
        let v_alpha = keyed(Axis::Height)?;
        let v_beta = keyed(Axis::Width)?;
        let anchor_v = match anchor {
            None => None,
            Some(ap) => {
                let extra = |axis: Axis| -> Result<Vec<Vec<W>>> {
                    ensure_zero_free(ap.filter(axis))?;
                    let inv = hadamard_inv(field, ap.filter(axis))?;
                    self.side(axis)[1..].iter().map(|g| hadamard(field, g, &inv)).collect()
                };
                Some((extra(Axis::Height)?, extra(Axis::Width)?))
            }
        };
        Ok(TransformedQueryIndex { v_alpha, v_beta, anchor_v })
    }
}

/// Query index keyed for one record, with `v'_αj, v'_βj` (`j = 2..k`) for the
/// anchor record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransformedQueryIndex<W: Word> {
    v_alpha: Vec<Vec<W>>,
    v_beta: Vec<Vec<W>>,
    anchor_v: Option<(Vec<Vec<W>>, Vec<Vec<W>>)>,
}

impl<W: Word> TransformedQueryIndex<W> {
    pub fn k(&self) -> usize {
        self.v_alpha.len()
    }

    pub fn vectors(&self, axis: Axis) -> &[Vec<W>] {
        match axis {
            Axis::Height => &self.v_alpha,
            Axis::Width => &self.v_beta,
        }
    }

    /// `v'_j` for `j = 2..k`, in order.
    pub fn anchor(&self, axis: Axis) -> Option<&[Vec<W>]> {
        self.anchor_v.as_ref().map(|(a, b)| match axis {
            Axis::Height => a.as_slice(),
            Axis::Width => b.as_slice(),
        })
    }
}

/// One-shot [`QueryIndexSpectra::protect`].
pub fn transform_index_query<W: Word>(
    engine: &NttEngine<W>,
    y_idx: &FactorIndex,
    rp: &IndexParam<W>,
    anchor: Option<&AnchorParam<W>>,
) -> Result<TransformedQueryIndex<W>> {
    QueryIndexSpectra::new(engine, y_idx)?.protect(engine.field(), rp, anchor)
}

/// Record-independent part of the spanning-tree recovery. With the anchor
/// edges `A_j = G(x_α1⁽¹⁾) ∘ G(flip(y_αj))` (from the anchor record's diagonal
/// for `j = 1` and from `t'_α ∘ v'_αj` otherwise), caches `A_i⁻¹ ∘ A_j` for
/// every `i != j`, and the same on the β side.
#[derive(Clone, Debug)]
pub struct AnchorBridge<W: Word> {
    k: usize,
    alpha: Vec<Option<Vec<W>>>,
    beta: Vec<Option<Vec<W>>>,
}

impl<W: Word> AnchorBridge<W> {
    pub fn new(field: &Field<W>, anchor_t: &TransformedIndex<W>, anchor_v: &TransformedQueryIndex<W>) -> Result<Self> {
        let k = anchor_t.k();
        if anchor_v.k() != k {
            return Err(Error::LengthMismatch { expected: k, found: anchor_v.k() });
        }
        let side = |axis: Axis| -> Result<Vec<Option<Vec<W>>>> {
            let mut ratios = vec![None; k * k];
            if k == 1 {
                return Ok(ratios);
            }
            let (Some(tp), Some(vp)) = (anchor_t.anchor(axis), anchor_v.anchor(axis)) else {
                return Err(Error::InvalidParameter("anchor record lacks its anchor vectors".into()));
            };
            let mut edges = vec![hadamard(field, &anchor_t.vectors(axis)[0], &anchor_v.vectors(axis)[0])?];
            for v in vp {
                edges.push(hadamard(field, tp, v)?);
            }
            let inverses = edges.iter().map(|e| hadamard_inv(field, e)).collect::<Result<Vec<_>>>()?;
            for i in 0..k {
                for j in 0..k {
                    if i != j {
                        ratios[i * k + j] = Some(hadamard(field, &inverses[i], &edges[j])?);
                    }
                }
            }
            Ok(ratios)
        };
        Ok(Self { k, alpha: side(Axis::Height)?, beta: side(Axis::Width)? })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// All `k²` products `G(x_αi) ∘ G(flip(y_αj))` (and β) for one record.
    pub fn products(
        &self,
        field: &Field<W>,
        t: &TransformedIndex<W>,
        v: &TransformedQueryIndex<W>,
    ) -> Result<IndexProducts<W>> {
        let k = self.k;
        if t.k() != k || v.k() != k {
            return Err(Error::LengthMismatch { expected: k, found: t.k().min(v.k()) });
        }
        let side = |axis: Axis, ratios: &[Option<Vec<W>>]| -> Result<Vec<Vec<W>>> {
            let diag = t
                .vectors(axis)
                .iter()
                .zip(v.vectors(axis))
                .map(|(a, b)| hadamard(field, a, b))
                .collect::<Result<Vec<_>>>()?;
            let mut out = Vec::with_capacity(k * k);
            for i in 0..k {
                for j in 0..k {
                    out.push(match &ratios[i * k + j] {
                        None => diag[i].clone(),
                        Some(r) => hadamard(field, &diag[i], r)?,
                    });
                }
            }
            Ok(out)
        };
        Ok(IndexProducts { k, alpha: side(Axis::Height, &self.alpha)?, beta: side(Axis::Width, &self.beta)? })
    }
}

/// Cross products for one record, column `(i-1)k + j` holding
/// `G(x_αi) ∘ G(flip(y_αj))`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexProducts<W: Word> {
    k: usize,
    alpha: Vec<Vec<W>>,
    beta: Vec<Vec<W>>,
}

impl<W: Word> IndexProducts<W> {
    /// Products computed in the clear, for checking the recovery.
    pub fn direct(engine: &NttEngine<W>, x_idx: &FactorIndex, y_idx: &FactorIndex) -> Result<Self> {
        let k = x_idx.k();
        let side = |axis: Axis| -> Result<Vec<Vec<W>>> {
            let mut out = Vec::with_capacity(k * k);
            for i in 0..k {
                let gx = spectrum(engine, x_idx.column(axis, i), axis, false)?;
                for j in 0..y_idx.k() {
                    out.push(hadamard(engine.field(), &gx, &spectrum(engine, y_idx.column(axis, j), axis, true)?)?);
                }
            }
            Ok(out)
        };
        Ok(Self { k, alpha: side(Axis::Height)?, beta: side(Axis::Width)? })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, axis: Axis, i: usize, j: usize) -> &[W] {
        let v = match axis {
            Axis::Height => &self.alpha,
            Axis::Width => &self.beta,
        };
        &v[i * self.k + j]
    }
}

/// Recovers the products of every record. `anchor` is the position of the
/// anchor record in `ts`/`vs`.
pub fn mst_recover_products<W: Word>(
    field: &Field<W>,
    ts: &[TransformedIndex<W>],
    vs: &[TransformedQueryIndex<W>],
    anchor: usize,
) -> Result<Vec<IndexProducts<W>>> {
    if ts.len() != vs.len() {
        return Err(Error::LengthMismatch { expected: ts.len(), found: vs.len() });
    }
    let (Some(at), Some(av)) = (ts.get(anchor), vs.get(anchor)) else {
        return Err(Error::EmptyDatabase);
    };
    let bridge = AnchorBridge::new(field, at, av)?;
    ts.iter().zip(vs).map(|(t, v)| bridge.products(field, t, v)).collect()
}

/// `M = M_α M_βᵀ` in factored form: `M_α` is `h x k²` and `M_β` is `w x k²`,
/// column `q` being the inverse transform of product `q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankCorrelation<W: Word> {
    h: usize,
    w: usize,
    m_alpha: Vec<Vec<W>>,
    m_beta: Vec<Vec<W>>,
}

impl<W: Word> RankCorrelation<W> {
    /// Runs exactly `2k²` counted inverse 1D transforms.
    pub fn new(engine: &NttEngine<W>, products: &IndexProducts<W>) -> Result<Self> {
        let (h, w) = engine.shape();
        let inv = |cols: &[Vec<W>], axis: Axis| -> Result<Vec<Vec<W>>> {
            cols.iter().map(|c| engine.intt1d(c, axis)).collect()
        };
        check_lengths(&products.alpha, axis_len(engine.params(), Axis::Height))?;
        check_lengths(&products.beta, axis_len(engine.params(), Axis::Width))?;
        Ok(Self { h, w, m_alpha: inv(&products.alpha, Axis::Height)?, m_beta: inv(&products.beta, Axis::Width)? })
    }

    #[inline]
    pub fn at(&self, field: &Field<W>, r: usize, c: usize) -> W {
        self.m_alpha
            .iter()
            .zip(&self.m_beta)
            .fold(W::zero(), |acc, (a, b)| field.add(acc, field.mul(a[r], b[c])))
    }

    pub fn to_matrix(&self, field: &Field<W>) -> GfMatrix<W> {
        GfMatrix::from_fn(self.h, self.w, |r, c| self.at(field, r, c))
    }

    /// Largest entry over the window, evaluating only the window's entries.
    pub fn window_max(&self, engine: &NttEngine<W>, win: ShiftWindow) -> Result<u64> {
        win.check(self.h, self.w)?;
        let map = engine.shift_map();
        let field = engine.field();
        Ok(win
            .shifts()
            .map(|(di, dj)| {
                let (r, c) = map.coord(di, dj);
                self.at(field, r, c).as_u64()
            })
            .max()
            .expect("window is nonempty"))
    }
}

/// `M = X̂ ⋆ Ŷ` in the engine's wrapped layout; costs `2k²` inverse 1D transforms.
pub fn compute_m<W: Word>(engine: &NttEngine<W>, products: &IndexProducts<W>) -> Result<GfMatrix<W>> {
    Ok(RankCorrelation::new(engine, products)?.to_matrix(engine.field()))
}

/// Largest windowed value of `M`.
pub fn approx_score<W: Word>(engine: &NttEngine<W>, m: &GfMatrix<W>, win: ShiftWindow) -> Result<u64> {
    Ok(crate::cirf::correlation_window(engine, m, win)?.max())
}

/// Approximate score straight from the products, skipping the full `M`.
pub fn approx_score_from_products<W: Word>(
    engine: &NttEngine<W>,
    products: &IndexProducts<W>,
    win: ShiftWindow,
) -> Result<u64> {
    RankCorrelation::new(engine, products)?.window_max(engine, win)
}

/// The unique filters mapping a plaintext index to its transformed index,
/// `r = t ∘ G(x)⁻¹`. `anchor_cols` is required iff `t` is an anchor record.
pub fn recover_index_params<W: Word>(
    engine: &NttEngine<W>,
    idx: &FactorIndex,
    t: &TransformedIndex<W>,
) -> Result<(IndexParam<W>, Option<AnchorParam<W>>)> {
    let field = engine.field();
    let solve = |col: &[u16], target: &[W], axis: Axis| -> Result<Vec<W>> {
        hadamard(field, target, &hadamard_inv(field, &spectrum(engine, col, axis, false)?)?)
    };
    let side = |axis: Axis| -> Result<Vec<Vec<W>>> {
        (0..idx.k()).map(|i| solve(idx.column(axis, i), &t.vectors(axis)[i], axis)).collect()
    };
    let rp = IndexParam { r_alpha: side(Axis::Height)?, r_beta: side(Axis::Width)? };
    let ap = match &t.anchor_t {
        None => None,
        Some((a, b)) => Some(AnchorParam {
            r_alpha: solve(idx.column(Axis::Height, 0), a, Axis::Height)?,
            r_beta: solve(idx.column(Axis::Width, 0), b, Axis::Width)?,
        }),
    };
    Ok((rp, ap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cirf::oracle::brute_corr_full;
    use crate::lowrank::ensure_zero_free_spectra;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn engine() -> NttEngine<u32> {
        NttEngine::new(GfParams::reference())
    }

    fn random_index(rng: &mut ChaCha8Rng, k: usize) -> FactorIndex {
        let a = (0..k).map(|_| (0..32).map(|_| rng.gen_bool(0.4) as u16).collect()).collect();
        let b = (0..k).map(|_| (0..64).map(|_| rng.gen_bool(0.4) as u16).collect()).collect();
        FactorIndex::new(32, 64, a, b).unwrap()
    }

    #[test]
    fn identity_filters_give_plain_spectra() {
        let e = engine();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let idx = random_index(&mut rng, 2);
        let t = transform_index_enroll(&e, &idx, &IndexParam::identity(e.params(), 2), None).unwrap();
        let f = e.field();
        let g = e.ntt1d(&lift(f, idx.column(Axis::Height, 1)), Axis::Height).unwrap();
        assert_eq!(t.vectors(Axis::Height)[1], g);
        let v = transform_index_query(&e, &idx, &IndexParam::identity(e.params(), 2), None).unwrap();
        let mut flipped = lift(f, idx.column(Axis::Width, 0));
        flipped.reverse();
        assert_eq!(v.vectors(Axis::Width)[0], e.ntt1d(&flipped, Axis::Width).unwrap());
    }

    #[test]
    fn zero_column_is_zero_under_any_filter() {
        let e = engine();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let idx = FactorIndex::zeros(32, 64, 2);
        let t = transform_index_enroll(&e, &idx, &IndexParam::random(e.params(), 2, &mut rng), None).unwrap();
        assert!(t.vectors(Axis::Height).iter().flatten().all(|v| *v == 0));
        let ap = AnchorParam::random(e.params(), &mut rng);
        let err = transform_index_enroll(&e, &idx, &IndexParam::random(e.params(), 2, &mut rng), Some(&ap));
        assert!(matches!(err, Err(Error::ZeroElement { .. })));
    }

    #[test]
    fn rank_one_query_has_no_anchor_extras() {
        let e = engine();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let idx = random_index(&mut rng, 1);
        let ap = AnchorParam::random(e.params(), &mut rng);
        let v = transform_index_query(&e, &idx, &IndexParam::random(e.params(), 1, &mut rng), Some(&ap)).unwrap();
        assert!(v.anchor(Axis::Height).unwrap().is_empty());
    }

    #[test]
    fn recovered_products_and_m_match_direct() {
        let e = engine();
        let f = *e.field();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for k in [1, 2] {
            let anchor_idx = ensure_zero_free_spectra(random_index(&mut rng, k), &e).unwrap();
            let y = ensure_zero_free_spectra(random_index(&mut rng, k), &e).unwrap();
            let other = random_index(&mut rng, k);
            let ap = AnchorParam::random(e.params(), &mut rng);
            let spectra = QueryIndexSpectra::new(&e, &y).unwrap();
            let mut ts = Vec::new();
            let mut vs = Vec::new();
            for (n, x) in [&anchor_idx, &other].into_iter().enumerate() {
                let rp = IndexParam::random(e.params(), k, &mut rng);
                let a = (n == 0).then_some(&ap);
                ts.push(transform_index_enroll(&e, x, &rp, a).unwrap());
                vs.push(spectra.protect(&f, &rp, a).unwrap());
            }
            let prods = mst_recover_products(&f, &ts, &vs, 0).unwrap();
            for (x, got) in [&anchor_idx, &other].into_iter().zip(&prods) {
                assert_eq!(got, &IndexProducts::direct(&e, x, &y).unwrap());
                let before = e.counter().get();
                let m = compute_m(&e, got).unwrap();
                assert_eq!(e.counter().get() - before, 2 * (k * k) as u64);
                let full = brute_corr_full(&x.reconstruct_image(), &y.reconstruct_image());
                let map = e.shift_map();
                for di in 0..32 {
                    for dj in 0..64 {
                        assert_eq!(m[map.coord(di, dj)] as u64, full[di as usize * 64 + dj as usize]);
                    }
                }
                let win = ShiftWindow::APPROX;
                assert_eq!(approx_score(&e, &m, win).unwrap(), approx_score_from_products(&e, got, win).unwrap());
            }
        }
    }

    #[test]
    fn zero_m_scores_zero() {
        let e = engine();
        assert_eq!(approx_score(&e, &GfMatrix::zeros(32, 64), ShiftWindow::APPROX).unwrap(), 0);
    }

    #[test]
    fn params_recovered_uniquely() {
        let e = engine();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let idx = ensure_zero_free_spectra(random_index(&mut rng, 2), &e).unwrap();
        let rp = IndexParam::random(e.params(), 2, &mut rng);
        let ap = AnchorParam::random(e.params(), &mut rng);
        let t = transform_index_enroll(&e, &idx, &rp, Some(&ap)).unwrap();
        let (rp2, ap2) = recover_index_params(&e, &idx, &t).unwrap();
        assert_eq!(rp2, rp);
        assert_eq!(ap2, Some(ap));
    }
}
