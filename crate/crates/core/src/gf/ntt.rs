//! One- and two-dimensional number theoretic transforms over ℤ_p.
//!
//! `forward[u] = Σ_i root^(u·i) · v[i]`. Power-of-two lengths use an
//! iterative radix-2 transform, other lengths the direct O(n²) sum. Both are
//! exact. Inverse transforms run the forward transform with `root⁻¹` and
//! scale by `n⁻¹`.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::field::Field;
use super::matrix::GfMatrix;
use super::params::GfParams;
use super::word::Word;
use crate::error::{Error, Result};

/// Shared count of 1D inverse transforms. Clones observe the same count.
#[derive(Clone, Debug, Default)]
pub struct InttCounter(Arc<AtomicU64>);

impl InttCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&self, n: u64) {
        self.0.fetch_add(n, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }
}

/// Precomputed transform of one length over one root.
#[derive(Clone, Debug)]
pub struct NttPlan<W: Word> {
    field: Field<W>,
    n: usize,
    root: W,
    n_inv: W,
    powers: Vec<W>,
    inv_powers: Vec<W>,
    bitrev: Option<Vec<usize>>,
    /// Radix-2 twiddles stage by stage: `half` entries for each butterfly
    /// span, paired with their [`Word::mul_fixed`] companions.
    stages: Vec<(W, u64)>,
    inv_stages: Vec<(W, u64)>,
    n_inv_companion: u64,
}

impl<W: Word> NttPlan<W> {
    /// Builds a plan for `root` of exact multiplicative order `n`.
    pub fn new(field: Field<W>, root: W, n: usize) -> Result<Self> {
        if n == 0 || !field.has_order(root, n as u64) {
            return Err(Error::OrderMismatch {
                which: "root",
                expected: n as u64,
                found: field.order(root).unwrap_or(0),
            });
        }
        let root_inv = field.inv(root).expect("root of unity is a unit");
        let n_inv = field
            .inv(field.reduce_u64(n as u64))
            .ok_or_else(|| Error::InvalidParameter(format!("length {n} is not invertible")))?;
        let table = |r: W| {
            let mut acc = W::one();
            (0..n)
                .map(|_| {
                    let cur = acc;
                    acc = field.mul(acc, r);
                    cur
                })
                .collect::<Vec<_>>()
        };
        let bitrev = n.is_power_of_two().then(|| {
            let bits = n.trailing_zeros();
            (0..n)
                .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
                .collect()
        });
        let powers = table(root);
        let inv_powers = table(root_inv);
        let stages = |pw: &[W]| {
            let mut out = Vec::with_capacity(n);
            let mut len = 2;
            while len <= n {
                out.extend((0..len / 2).map(|j| {
                    let w = pw[j * (n / len)];
                    (w, W::fixed_companion(w, field.modulus()))
                }));
                len <<= 1;
            }
            out
        };
        let (fwd, inv) = if bitrev.is_some() { (stages(&powers), stages(&inv_powers)) } else { (Vec::new(), Vec::new()) };
        let n_inv_companion = W::fixed_companion(n_inv, field.modulus());
        Ok(Self { field, n, root, n_inv, powers, inv_powers, bitrev, stages: fwd, inv_stages: inv, n_inv_companion })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn root(&self) -> W {
        self.root
    }

    fn check_len(&self, v: &[W]) -> Result<()> {
        if v.len() == self.n {
            Ok(())
        } else {
            Err(Error::LengthMismatch { expected: self.n, found: v.len() })
        }
    }

    pub fn forward(&self, v: &[W]) -> Result<Vec<W>> {
        self.check_len(v)?;
        let mut out = v.to_vec();
        self.transform(&mut out, false);
        Ok(out)
    }

    /// Inverse transform. Does not touch any counter; see [`NttEngine`].
    pub fn inverse(&self, v: &[W]) -> Result<Vec<W>> {
        self.check_len(v)?;
        let mut out = v.to_vec();
        self.inverse_in_place(&mut out);
        Ok(out)
    }

    pub(crate) fn forward_in_place(&self, v: &mut [W]) {
        self.transform(v, false);
    }

    pub(crate) fn inverse_in_place(&self, v: &mut [W]) {
        self.transform(v, true);
        let p = self.field.modulus();
        for x in v.iter_mut() {
            *x = W::mul_fixed(*x, self.n_inv, self.n_inv_companion, p);
        }
    }

    fn transform(&self, v: &mut [W], inverse: bool) {
        debug_assert_eq!(v.len(), self.n);
        match (&self.bitrev, inverse) {
            (Some(rev), false) => self.radix2(v, &self.stages, rev),
            (Some(rev), true) => self.radix2(v, &self.inv_stages, rev),
            (None, false) => self.direct(v, &self.powers),
            (None, true) => self.direct(v, &self.inv_powers),
        }
    }

    /// Transforms every column of the row-major `n x lanes` block `data`
    /// together, unscaled. Power-of-two lengths only.
    fn transform_lanes(&self, data: &mut [W], lanes: usize, inverse: bool) {
        let rev = self.bitrev.as_ref().expect("radix-2 plan");
        let stages = if inverse { &self.inv_stages } else { &self.stages };
        let f = &self.field;
        let p = f.modulus();
        for (i, &j) in rev.iter().enumerate() {
            if i < j {
                let (a, b) = data.split_at_mut(j * lanes);
                a[i * lanes..(i + 1) * lanes].swap_with_slice(&mut b[..lanes]);
            }
        }
        let (mut len, mut offset) = (2, 0);
        while len <= self.n {
            let half = len / 2;
            let tw = &stages[offset..offset + half];
            for start in (0..self.n).step_by(len) {
                let block = &mut data[start * lanes..(start + len) * lanes];
                let (lo, hi) = block.split_at_mut(half * lanes);
                for (j, &(w, c)) in tw.iter().enumerate() {
                    let a = &mut lo[j * lanes..(j + 1) * lanes];
                    let b = &mut hi[j * lanes..(j + 1) * lanes];
                    if j == 0 {
                        for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                            let (u, t) = (*x, *y);
                            *x = f.add(u, t);
                            *y = f.sub(u, t);
                        }
                    } else {
                        for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                            let t = W::mul_fixed(*y, w, c, p);
                            let u = *x;
                            *x = f.add(u, t);
                            *y = f.sub(u, t);
                        }
                    }
                }
            }
            offset += half;
            len <<= 1;
        }
    }

    fn direct(&self, v: &mut [W], powers: &[W]) {
        let n = self.n;
        let f = &self.field;
        let src = v.to_vec();
        for (u, out) in v.iter_mut().enumerate() {
            let mut acc = W::zero();
            for (i, &x) in src.iter().enumerate() {
                acc = f.add(acc, f.mul(powers[(u * i) % n], x));
            }
            *out = acc;
        }
    }

    fn radix2(&self, v: &mut [W], stages: &[(W, u64)], rev: &[usize]) {
        let n = self.n;
        let f = &self.field;
        let p = f.modulus();
        for (i, &j) in rev.iter().enumerate() {
            if i < j {
                v.swap(i, j);
            }
        }
        // first stage: every twiddle is 1
        for pair in v.chunks_exact_mut(2) {
            let (u, t) = (pair[0], pair[1]);
            pair[0] = f.add(u, t);
            pair[1] = f.sub(u, t);
        }
        let (mut len, mut offset) = (4, 1);
        while len <= n {
            let half = len / 2;
            let tw = &stages[offset..offset + half];
            for chunk in v.chunks_exact_mut(len) {
                let (lo, hi) = chunk.split_at_mut(half);
                for j in 0..half {
                    let (w, c) = tw[j];
                    let t = W::mul_fixed(hi[j], w, c, p);
                    let u = lo[j];
                    lo[j] = f.add(u, t);
                    hi[j] = f.sub(u, t);
                }
            }
            offset += half;
            len <<= 1;
        }
    }
}

/// Forward 1D transform of `v` with `root`, whose order must equal `v.len()`.
pub fn ntt1d<W: Word>(field: &Field<W>, v: &[W], root: W) -> Result<Vec<W>> {
    plan_for(field, v, root)?.forward(v)
}

/// Inverse 1D transform; adds one to `counter`.
pub fn intt1d<W: Word>(field: &Field<W>, v: &[W], root: W, counter: &InttCounter) -> Result<Vec<W>> {
    let out = plan_for(field, v, root)?.inverse(v)?;
    counter.add(1);
    Ok(out)
}

fn plan_for<W: Word>(field: &Field<W>, v: &[W], root: W) -> Result<NttPlan<W>> {
    if !field.has_order(root, v.len() as u64) {
        return Err(Error::LengthMismatch {
            expected: field.order(root).unwrap_or(0) as usize,
            found: v.len(),
        });
    }
    NttPlan::new(*field, root, v.len())
}

/// Which image axis a 1D vector lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    /// Length `h`, transformed with `alpha`.
    Height,
    /// Length `w`, transformed with `beta`.
    Width,
}

/// Maps a shift `(Δi, Δj)` to the matrix coordinate at which the inverse
/// transform of `F(X) ∘ F(flip(Y))` stores `(X ⋆ Y)[Δi, Δj]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ShiftMap {
    h: usize,
    w: usize,
    row_offset: usize,
    row_step: isize,
    col_offset: usize,
    col_step: isize,
}

impl ShiftMap {
    #[inline]
    pub fn coord(&self, di: isize, dj: isize) -> (usize, usize) {
        let r = (self.row_offset as isize + self.row_step * di).rem_euclid(self.h as isize);
        let c = (self.col_offset as isize + self.col_step * dj).rem_euclid(self.w as isize);
        (r as usize, c as usize)
    }
}

/// Transform context for one geometry: the validated parameters, plans for
/// both axes, the inverse-transform counter and the calibrated shift map.
#[derive(Clone, Debug)]
pub struct NttEngine<W: Word> {
    params: GfParams<W>,
    field: Field<W>,
    col_plan: NttPlan<W>,
    row_plan: NttPlan<W>,
    counter: InttCounter,
    shift_map: ShiftMap,
}

impl<W: Word> NttEngine<W> {
    pub fn new(params: GfParams<W>) -> Self {
        let field = params.field();
        let col_plan = NttPlan::new(field, params.alpha(), params.h()).expect("validated alpha");
        let row_plan = NttPlan::new(field, params.beta(), params.w()).expect("validated beta");
        let mut engine = Self {
            params,
            field,
            col_plan,
            row_plan,
            counter: InttCounter::new(),
            shift_map: ShiftMap { h: params.h(), w: params.w(), row_offset: 0, row_step: 1, col_offset: 0, col_step: 1 },
        };
        engine.shift_map = engine.calibrate();
        engine
    }

    /// Locates the zero and unit shifts with delta probes. The probes use the
    /// uncounted inverse so the counter starts at zero.
    fn calibrate(&self) -> ShiftMap {
        let (h, w) = self.params.shape();
        let delta = |i: usize, j: usize| {
            let mut m = GfMatrix::zeros(h, w);
            m[(i % h, j % w)] = W::one();
            m
        };
        let locate = |y: GfMatrix<W>| -> (usize, usize) {
            // (X ⋆ Y)[Δ] = Y[Δ] for X = delta at the origin.
            let x = delta(0, 0);
            let flipped = GfMatrix::from_fn(h, w, |i, j| y[(h - 1 - i, w - 1 - j)]);
            let mut prod = self
                .ntt2d(&x)
                .and_then(|a| a.hadamard(&self.ntt2d(&flipped)?, &self.field))
                .expect("probe shapes match");
            self.intt2d_uncounted(&mut prod);
            let idx = prod.first_nonzero().expect("probe correlation is nonzero");
            (idx / w, idx % w)
        };
        let (r0, c0) = locate(delta(0, 0));
        let (r1, c1) = locate(delta(1, 1));
        let step = |a: usize, b: usize, n: usize| if (a + 1) % n == b { 1 } else { -1 };
        ShiftMap {
            h,
            w,
            row_offset: r0,
            row_step: step(r0, r1, h),
            col_offset: c0,
            col_step: step(c0, c1, w),
        }
    }

    pub fn params(&self) -> &GfParams<W> {
        &self.params
    }

    pub fn field(&self) -> &Field<W> {
        &self.field
    }

    pub fn shape(&self) -> (usize, usize) {
        self.params.shape()
    }

    pub fn counter(&self) -> &InttCounter {
        &self.counter
    }

    pub fn shift_map(&self) -> &ShiftMap {
        &self.shift_map
    }

    pub fn plan(&self, axis: Axis) -> &NttPlan<W> {
        match axis {
            Axis::Height => &self.col_plan,
            Axis::Width => &self.row_plan,
        }
    }

    pub fn ntt1d(&self, v: &[W], axis: Axis) -> Result<Vec<W>> {
        self.plan(axis).forward(v)
    }

    pub fn intt1d(&self, v: &[W], axis: Axis) -> Result<Vec<W>> {
        let out = self.plan(axis).inverse(v)?;
        self.counter.add(1);
        Ok(out)
    }

    /// Row-column 2D transform: `w` column transforms, then `h` row transforms.
    pub fn ntt2d(&self, x: &GfMatrix<W>) -> Result<GfMatrix<W>> {
        x.ensure_shape(self.shape())?;
        let mut out = x.clone();
        self.apply_2d(&mut out, false);
        Ok(out)
    }

    /// Inverse 2D transform; adds exactly `h + w` to the counter.
    pub fn intt2d(&self, t: &GfMatrix<W>) -> Result<GfMatrix<W>> {
        t.ensure_shape(self.shape())?;
        let mut out = t.clone();
        self.intt2d_uncounted(&mut out);
        let (h, w) = self.shape();
        self.counter.add((h + w) as u64);
        Ok(out)
    }

    fn intt2d_uncounted(&self, m: &mut GfMatrix<W>) {
        self.apply_2d(m, true);
    }

    fn apply_2d(&self, m: &mut GfMatrix<W>, inverse: bool) {
        let (h, w) = self.shape();
        let data = m.as_mut_slice();
        if self.col_plan.bitrev.is_some() && self.row_plan.bitrev.is_some() {
            // Columns of the h x w block, then columns of its transpose.
            self.col_plan.transform_lanes(data, w, inverse);
            let mut t = vec![W::zero(); h * w];
            transpose(data, &mut t, h, w);
            self.row_plan.transform_lanes(&mut t, h, inverse);
            transpose(&t, data, w, h);
            if inverse {
                let field = &self.field;
                let scale = field.mul(self.col_plan.n_inv, self.row_plan.n_inv);
                let (p, c) = (field.modulus(), W::fixed_companion(scale, field.modulus()));
                for x in data.iter_mut() {
                    *x = W::mul_fixed(*x, scale, c, p);
                }
            }
            return;
        }
        let run = |plan: &NttPlan<W>, v: &mut [W]| {
            if inverse {
                plan.inverse_in_place(v);
            } else {
                plan.forward_in_place(v);
            }
        };
        let mut cols = vec![W::zero(); h * w];
        transpose(data, &mut cols, h, w);
        for col in cols.chunks_exact_mut(h) {
            run(&self.col_plan, col);
        }
        transpose(&cols, data, w, h);
        for row in data.chunks_exact_mut(w) {
            run(&self.row_plan, row);
        }
    }
}

/// Writes the transpose of the row-major `rows x cols` matrix `src` into `dst`.
fn transpose<W: Word>(src: &[W], dst: &mut [W], rows: usize, cols: usize) {
    for (i, row) in src.chunks_exact(cols).enumerate() {
        for (j, &v) in row.iter().enumerate() {
            dst[j * rows + i] = v;
        }
    }
}

impl<W: Word> GfMatrix<W> {
    fn first_nonzero(&self) -> Option<usize> {
        self.as_slice().iter().position(|v| !v.is_zero())
    }
}
