//! Rank-k binary factorisation of feature images: the plaintext index
//! `X ≈ X_α X_βᵀ` with `{0,1}` factors and an integer product.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cirf::BioImage;
use crate::error::{Error, Result};
use crate::gf::{Axis, Field, GfMatrix, NttEngine, Word};

const RESTARTS: usize = 8;
const MAX_SWEEPS: usize = 64;
const REFINE_PASSES: usize = 4;
const JOINT_MAX_RANK: usize = 6;
const JOINT_RESTARTS: usize = 32;

/// Plaintext index of one image: `k` column pairs `(x_αi, x_βi)` with
/// `x_αi` of length `h` and `x_βi` of length `w`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FactorIndex {
    h: usize,
    w: usize,
    pads: (usize, usize),
    x_alpha: Vec<Vec<u16>>,
    x_beta: Vec<Vec<u16>>,
}

impl FactorIndex {
    pub fn new(h: usize, w: usize, x_alpha: Vec<Vec<u16>>, x_beta: Vec<Vec<u16>>) -> Result<Self> {
        if x_alpha.len() != x_beta.len() || x_alpha.is_empty() {
            return Err(Error::InvalidParameter("factor column counts must agree and be positive".into()));
        }
        for c in &x_alpha {
            if c.len() != h {
                return Err(Error::LengthMismatch { expected: h, found: c.len() });
            }
        }
        for c in &x_beta {
            if c.len() != w {
                return Err(Error::LengthMismatch { expected: w, found: c.len() });
            }
        }
        Ok(Self { h, w, pads: (0, 0), x_alpha, x_beta })
    }

    pub fn zeros(h: usize, w: usize, k: usize) -> Self {
        Self { h, w, pads: (0, 0), x_alpha: vec![vec![0; h]; k], x_beta: vec![vec![0; w]; k] }
    }

    pub fn with_pads(mut self, pad_i: usize, pad_j: usize) -> Self {
        self.pads = (pad_i, pad_j);
        self
    }

    pub fn k(&self) -> usize {
        self.x_alpha.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    pub fn alpha(&self) -> &[Vec<u16>] {
        &self.x_alpha
    }

    pub fn beta(&self) -> &[Vec<u16>] {
        &self.x_beta
    }

    pub fn column(&self, axis: Axis, i: usize) -> &[u16] {
        match axis {
            Axis::Height => &self.x_alpha[i],
            Axis::Width => &self.x_beta[i],
        }
    }

    fn column_mut(&mut self, axis: Axis, i: usize) -> &mut Vec<u16> {
        match axis {
            Axis::Height => &mut self.x_alpha[i],
            Axis::Width => &mut self.x_beta[i],
        }
    }

    /// `X̂ = Σ_i x_αi x_βiᵀ` over the integers.
    pub fn reconstruct_image(&self) -> BioImage {
        BioImage::from_fn(self.h, self.w, |r, c| {
            self.x_alpha.iter().zip(&self.x_beta).map(|(a, b)| a[r] * b[c]).sum()
        })
    }

    /// `X̂ = X_α X_βᵀ mod p`.
    pub fn reconstruct<W: Word>(&self, field: &Field<W>) -> GfMatrix<W> {
        let img = self.reconstruct_image();
        GfMatrix::from_fn(self.h, self.w, |r, c| field.reduce_u64(img.get(r, c) as u64))
    }

    /// `Σ |X - X̂|` against a binary image.
    pub fn mismatch(&self, x: &BioImage) -> u64 {
        let xh = self.reconstruct_image();
        x.pixels()
            .iter()
            .zip(xh.pixels())
            .map(|(&a, &b)| (a as i64 - b as i64).unsigned_abs())
            .sum()
    }
}

/// One rank-1 component as row and column supports.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Rect {
    rows: Vec<bool>,
    cols: Vec<bool>,
}

impl Rect {
    fn empty(h: usize, w: usize) -> Self {
        Self { rows: vec![false; h], cols: vec![false; w] }
    }

    fn gain(&self, g: &[i32], w: usize) -> i64 {
        let mut s = 0i64;
        for (i, &ri) in self.rows.iter().enumerate() {
            if ri {
                for (j, &cj) in self.cols.iter().enumerate() {
                    if cj {
                        s += g[i * w + j] as i64;
                    }
                }
            }
        }
        s
    }
}

/// Per-cell change in mismatch from covering it once more: `+1` for an
/// uncovered foreground pixel, `-1` otherwise.
fn gain_matrix(x: &BioImage, cover: &[u16]) -> Vec<i32> {
    x.pixels()
        .iter()
        .zip(cover)
        .map(|(&v, &c)| if v == 1 && c == 0 { 1 } else { -1 })
        .collect()
}

/// Alternating row/column updates from `start` until a fixed point. Each
/// update is optimal for the other side, so the gain never decreases.
fn climb(g: &[i32], h: usize, w: usize, mut rect: Rect) -> (Rect, i64) {
    for _ in 0..MAX_SWEEPS {
        let rows: Vec<bool> = (0..h)
            .map(|i| (0..w).filter(|&j| rect.cols[j]).map(|j| g[i * w + j]).sum::<i32>() > 0)
            .collect();
        let cols: Vec<bool> = (0..w)
            .map(|j| (0..h).filter(|&i| rows[i]).map(|i| g[i * w + j]).sum::<i32>() > 0)
            .collect();
        let next = Rect { rows, cols };
        if next == rect {
            break;
        }
        rect = next;
    }
    let gain = rect.gain(g, w);
    (rect, gain)
}

fn best_rect(g: &[i32], h: usize, w: usize, rng: &mut ChaCha8Rng) -> (Rect, i64) {
    let positives: Vec<usize> = (0..h * w).filter(|&k| g[k] > 0).collect();
    let mut best = (Rect::empty(h, w), 0i64);
    if positives.is_empty() {
        return best;
    }
    // every row and every column as a single-line seed, then random seed cells
    let row_seeds = (0..h).map(|i| (Some(i), None));
    let col_seeds = (0..w).map(|j| (None, Some(j)));
    let random_seeds: Vec<_> = (0..RESTARTS)
        .map(|_| {
            let cell = positives[rng.gen_range(0..positives.len())];
            (Some(cell / w), Some(cell % w))
        })
        .collect();
    for (row, col) in row_seeds.chain(col_seeds).chain(random_seeds) {
        let mut start = Rect::empty(h, w);
        match (row, col) {
            (Some(i), None) => {
                start.rows[i] = true;
                for j in 0..w {
                    start.cols[j] = g[i * w + j] > 0;
                }
            }
            (None, Some(j)) => {
                start.cols[j] = true;
                for i in 0..h {
                    start.rows[i] = g[i * w + j] > 0;
                }
                start.cols = (0..w)
                    .map(|c| (0..h).filter(|&i| start.rows[i]).map(|i| g[i * w + c]).sum::<i32>() > 0)
                    .collect();
            }
            (Some(i), Some(j)) => {
                start.rows[i] = true;
                start.cols[j] = true;
            }
            (None, None) => unreachable!(),
        }
        if start.cols.iter().all(|&c| !c) {
            continue;
        }
        let (rect, gain) = climb(g, h, w, start);
        if gain > best.1 {
            best = (rect, gain);
        }
    }
    best
}

fn coverage(rects: &[Rect], h: usize, w: usize, skip: Option<usize>) -> Vec<u16> {
    let mut cover = vec![0u16; h * w];
    for (idx, r) in rects.iter().enumerate() {
        if Some(idx) == skip {
            continue;
        }
        for i in (0..h).filter(|&i| r.rows[i]) {
            for j in (0..w).filter(|&j| r.cols[j]) {
                cover[i * w + j] += 1;
            }
        }
    }
    cover
}

fn stage_rng(seed: u64, stage: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage as u64 + 1);
    rng
}

/// Greedy rank-1 peeling with alternating hill climbing (8 seeded restarts
/// per component), each peel followed by coordinate refinement of every
/// component. Deterministic in `(x, k, seed)`. A rank-`k+1` run passes through
/// the rank-`k` result and then only accepts improvements, so the mismatch
/// never grows with `k`.
pub fn factorize(x: &BioImage, k: usize, seed: u64) -> Result<FactorIndex> {
    let (h, w) = x.shape();
    if k == 0 {
        return Err(Error::InvalidParameter("rank must be at least 1".into()));
    }
    if k > h.min(w) {
        return Err(Error::RankTooLarge { k, max: h.min(w) });
    }
    x.ensure_binary()?;

    let mut rects: Vec<Rect> = Vec::with_capacity(k);
    for stage in 0..k {
        let mut rng = stage_rng(seed, stage);
        let g = gain_matrix(x, &coverage(&rects, h, w, None));
        let (rect, gain) = best_rect(&g, h, w, &mut rng);
        rects.push(if gain > 0 { rect } else { Rect::empty(h, w) });
        refine(x, &mut rects, h, w, &mut rng);
    }

    let x_alpha = rects.iter().map(|r| r.rows.iter().map(|&b| b as u16).collect()).collect();
    let x_beta = rects.iter().map(|r| r.cols.iter().map(|&b| b as u16).collect()).collect();
    Ok(FactorIndex { h, w, pads: x.pads(), x_alpha, x_beta })
}

fn total_mismatch(x: &BioImage, rects: &[Rect], h: usize, w: usize) -> u64 {
    let cover = coverage(rects, h, w, None);
    x.pixels().iter().zip(&cover).map(|(&v, &c)| (v as i64 - c as i64).unsigned_abs()).sum()
}

/// Re-chooses every row's membership pattern across all components given
/// the column supports (or the transpose). Exact per line, so the mismatch
/// never increases.
fn sweep_lines(x: &BioImage, rects: &mut [Rect], h: usize, w: usize, rows: bool) {
    let k = rects.len();
    let (lines, len) = if rows { (h, w) } else { (w, h) };
    let other: Vec<Vec<bool>> = rects.iter().map(|r| if rows { r.cols.clone() } else { r.rows.clone() }).collect();
    for line in 0..lines {
        let pixel = |t: usize| if rows { x.get(line, t) } else { x.get(t, line) };
        let current = (0..k).fold(0, |acc, c| {
            let member = if rows { rects[c].rows[line] } else { rects[c].cols[line] };
            acc | (member as usize) << c
        });
        let best = (0..1usize << k)
            .map(|pat| {
                let cost: u64 = (0..len)
                    .map(|t| {
                        let v = (0..k).filter(|&c| pat >> c & 1 == 1 && other[c][t]).count() as i64;
                        (pixel(t) as i64 - v).unsigned_abs()
                    })
                    .sum();
                // prefer keeping the current pattern on ties
                (cost, pat != current, pat)
            })
            .min()
            .expect("nonempty")
            .2;
        for (c, r) in rects.iter_mut().enumerate() {
            let bit = best >> c & 1 == 1;
            if rows {
                r.rows[line] = bit;
            } else {
                r.cols[line] = bit;
            }
        }
    }
}

/// Alternates exact row and column re-assignment until the mismatch stops
/// falling. `rows_first` picks which side is re-chosen first.
fn joint_sweep(x: &BioImage, rects: &mut [Rect], h: usize, w: usize, rows_first: bool) {
    if rects.len() > JOINT_MAX_RANK {
        return;
    }
    let mut before = total_mismatch(x, rects, h, w);
    for _ in 0..MAX_SWEEPS {
        sweep_lines(x, rects, h, w, rows_first);
        sweep_lines(x, rects, h, w, !rows_first);
        let after = total_mismatch(x, rects, h, w);
        if after >= before {
            break;
        }
        before = after;
    }
}

fn refine(x: &BioImage, rects: &mut [Rect], h: usize, w: usize, rng: &mut ChaCha8Rng) {
    if rects.len() < 2 {
        return;
    }
    for _ in 0..REFINE_PASSES {
        let start = total_mismatch(x, rects, h, w);
        for c in 0..rects.len() {
            let g = gain_matrix(x, &coverage(rects, h, w, Some(c)));
            let current = rects[c].gain(&g, w);
            let (climbed, climbed_gain) = climb(&g, h, w, rects[c].clone());
            let (fresh, fresh_gain) = best_rect(&g, h, w, rng);
            let (cand, cand_gain) = if fresh_gain > climbed_gain { (fresh, fresh_gain) } else { (climbed, climbed_gain) };
            if cand_gain > current {
                rects[c] = cand;
            }
        }
        joint_sweep(x, rects, h, w, true);
        if total_mismatch(x, rects, h, w) >= start {
            break;
        }
    }
    joint_restarts(x, rects, h, w, rng);
}

/// Joint sweeps from singleton seeds (densest lines, then random lines or
/// random supports); keeps any strict improvement.
fn joint_restarts(x: &BioImage, rects: &mut [Rect], h: usize, w: usize, rng: &mut ChaCha8Rng) {
    let k = rects.len();
    if k > JOINT_MAX_RANK {
        return;
    }
    let mut best = total_mismatch(x, rects, h, w);
    let mut try_start = |cand: &mut Vec<Rect>, rows_seeded: bool, rects: &mut [Rect]| {
        joint_sweep(x, cand, h, w, !rows_seeded);
        let m = total_mismatch(x, cand, h, w);
        if m < best {
            best = m;
            rects.clone_from_slice(cand);
        }
    };
    let singleton = |n: usize, at: usize| (0..n).map(|t| t == at).collect::<Vec<bool>>();
    let densest = |rows: bool| {
        let (n, m) = if rows { (h, w) } else { (w, h) };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&a| {
            let ones = (0..m).filter(|&b| if rows { x.get(a, b) == 1 } else { x.get(b, a) == 1 }).count();
            (std::cmp::Reverse(ones), a)
        });
        order
    };

    for rows_seeded in [false, true] {
        let order = densest(rows_seeded);
        let mut cand: Vec<Rect> = order
            .iter()
            .cycle()
            .take(k)
            .map(|&a| seeded_rect(h, w, rows_seeded, singleton(if rows_seeded { h } else { w }, a)))
            .collect();
        try_start(&mut cand, rows_seeded, rects);
    }

    for restart in 0..JOINT_RESTARTS {
        let rows_seeded = restart % 2 == 1;
        let n = if rows_seeded { h } else { w };
        let density = rng.gen_range(0.1..0.6);
        let mut cand: Vec<Rect> = (0..k)
            .map(|_| {
                let support = if restart % 4 < 2 {
                    singleton(n, rng.gen_range(0..n))
                } else {
                    (0..n).map(|_| rng.gen_bool(density)).collect()
                };
                seeded_rect(h, w, rows_seeded, support)
            })
            .collect();
        try_start(&mut cand, rows_seeded, rects);
    }
}

fn seeded_rect(h: usize, w: usize, rows_seeded: bool, support: Vec<bool>) -> Rect {
    if rows_seeded {
        Rect { rows: support, cols: vec![false; w] }
    } else {
        Rect { rows: vec![false; h], cols: support }
    }
}

/// Result of checking that every factor column has a zero-free 1D spectrum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnchorCheck {
    Clean,
    /// At least one column needed a one-pixel perturbation; the repaired index.
    Dithered(FactorIndex),
}

fn spectrum_is_zero_free<W: Word>(engine: &NttEngine<W>, col: &[u16], axis: Axis) -> bool {
    let field = engine.field();
    let lifted: Vec<W> = col.iter().map(|&v| field.reduce_u64(v as u64)).collect();
    engine
        .ntt1d(&lifted, axis)
        .map(|s| s.iter().all(|v| !v.is_zero()))
        .unwrap_or(false)
}

/// Interior positions of an axis, nearest the centre first.
fn dither_positions(len: usize, pad: usize) -> Vec<usize> {
    let lo = pad.min(len);
    let hi = len.saturating_sub(pad).max(lo);
    let (lo, hi) = if lo == hi { (0, len) } else { (lo, hi) };
    let mid = (lo + hi) / 2;
    let mut pos: Vec<usize> = (lo..hi).collect();
    pos.sort_by_key(|&p| (p as isize - mid as isize).unsigned_abs());
    pos
}

/// Verifies that every column's 1D transform has no zero coefficient, so the
/// spanning-tree products built from it can be inverted. Offending columns get
/// one interior pixel incremented by 1, trying positions outward from the
/// centre.
pub fn check_anchor<W: Word>(idx: &FactorIndex, engine: &NttEngine<W>) -> Result<AnchorCheck> {
    let p = engine.field().modulus().as_u64();
    let mut out = idx.clone();
    let mut dithered = false;
    for (axis, side, pad) in [(Axis::Height, "alpha", idx.pads.0), (Axis::Width, "beta", idx.pads.1)] {
        for c in 0..idx.k() {
            if spectrum_is_zero_free(engine, idx.column(axis, c), axis) {
                continue;
            }
            let original = idx.column(axis, c).to_vec();
            let fixed = dither_positions(original.len(), pad).into_iter().find_map(|pos| {
                let mut cand = original.clone();
                cand[pos] = ((cand[pos] as u64 + 1) % p) as u16;
                spectrum_is_zero_free(engine, &cand, axis).then_some(cand)
            });
            match fixed {
                Some(col) => {
                    *out.column_mut(axis, c) = col;
                    dithered = true;
                }
                None => return Err(Error::DitherExhausted { side, column: c }),
            }
        }
    }
    Ok(if dithered { AnchorCheck::Dithered(out) } else { AnchorCheck::Clean })
}

/// [`check_anchor`], returning the usable index either way.
pub fn ensure_zero_free_spectra<W: Word>(idx: FactorIndex, engine: &NttEngine<W>) -> Result<FactorIndex> {
    Ok(match check_anchor(&idx, engine)? {
        AnchorCheck::Clean => idx,
        AnchorCheck::Dithered(d) => d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::GfParams;

    fn random_binary(seed: u64, h: usize, w: usize, density: f64) -> BioImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BioImage::from_fn(h, w, |_, _| rng.gen_bool(density) as u16)
    }

    #[test]
    fn zero_image_gives_zero_factors() {
        let x = BioImage::zeros(32, 64);
        for k in 1..=3 {
            let idx = factorize(&x, k, 0).unwrap();
            assert_eq!(idx, FactorIndex::zeros(32, 64, k));
            assert_eq!(idx.mismatch(&x), 0);
        }
    }

    #[test]
    fn rank_one_input_is_exact() {
        let u: Vec<u16> = (0..32).map(|i| (i % 3 == 0 || i > 25) as u16).collect();
        let v: Vec<u16> = (0..64).map(|j| (j % 5 < 2) as u16).collect();
        let x = BioImage::from_fn(32, 64, |i, j| u[i] * v[j]);
        let idx = factorize(&x, 1, 9).unwrap();
        assert_eq!(idx.mismatch(&x), 0);
        assert_eq!(idx.reconstruct_image(), x);
    }

    #[test]
    fn reconstruct_sums_outer_products() {
        let a = vec![vec![1, 0, 1], vec![0, 1, 1]];
        let b = vec![vec![1, 1, 0, 0], vec![0, 1, 1, 0]];
        let idx = FactorIndex::new(3, 4, a.clone(), b.clone()).unwrap();
        let f = Field::new(8641u32);
        let m = idx.reconstruct(&f);
        for i in 0..3 {
            for j in 0..4 {
                let direct = a[0][i] * b[0][j] + a[1][i] * b[1][j];
                assert_eq!(m[(i, j)], direct as u32);
            }
        }
        assert_eq!(FactorIndex::zeros(3, 4, 2).reconstruct(&f), GfMatrix::zeros(3, 4));
    }

    #[test]
    fn errors() {
        let x = BioImage::zeros(4, 8);
        assert!(matches!(factorize(&x, 5, 0), Err(Error::RankTooLarge { k: 5, max: 4 })));
        assert!(factorize(&x, 0, 0).is_err());
        let nb = BioImage::new(1, 2, vec![0, 3]).unwrap();
        assert!(matches!(factorize(&nb, 1, 0), Err(Error::NotBinary { index: 1, value: 3 })));
    }

    #[test]
    fn deterministic_and_monotone_in_rank() {
        for seed in 0..10 {
            let x = random_binary(seed, 32, 64, 0.2);
            let a = factorize(&x, 2, seed).unwrap();
            assert_eq!(a, factorize(&x, 2, seed).unwrap());
            let mut prev = u64::MAX;
            for k in 1..=4 {
                let m = factorize(&x, k, seed).unwrap().mismatch(&x);
                assert!(m <= prev, "seed {seed} k {k}: {m} > {prev}");
                prev = m;
            }
        }
    }

    #[test]
    fn anchor_check_on_delta_and_zero_columns() {
        let engine = NttEngine::new(GfParams::<u32>::reference());
        let mut a = vec![0u16; 32];
        a[5] = 1;
        let mut b = vec![0u16; 64];
        b[9] = 1;
        let delta = FactorIndex::new(32, 64, vec![a], vec![b]).unwrap();
        assert_eq!(check_anchor(&delta, &engine).unwrap(), AnchorCheck::Clean);

        let zero = FactorIndex::zeros(32, 64, 2).with_pads(6, 12);
        match check_anchor(&zero, &engine).unwrap() {
            AnchorCheck::Dithered(d) => {
                assert_eq!(check_anchor(&d, &engine).unwrap(), AnchorCheck::Clean);
                assert_eq!(d.alpha()[0].iter().sum::<u16>(), 1);
                assert_eq!(d.alpha()[0][16], 1);
                assert_eq!(d.beta()[1][32], 1);
            }
            AnchorCheck::Clean => panic!("zero column has an all-zero spectrum"),
        }
    }

    #[test]
    fn all_ones_column_is_repaired() {
        // spectrum of a constant column is (n, 0, ..., 0)
        let engine = NttEngine::new(GfParams::<u32>::reference());
        let idx = FactorIndex::new(32, 64, vec![vec![1; 32]], vec![vec![1; 64]]).unwrap();
        let AnchorCheck::Dithered(d) = check_anchor(&idx, &engine).unwrap() else {
            panic!("constant column must be dithered");
        };
        assert_eq!(d.alpha()[0].iter().filter(|&&v| v == 2).count(), 1);
    }
}
