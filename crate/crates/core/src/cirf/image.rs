use crate::error::{Error, Result};
use crate::gf::{Field, GfMatrix, Word};

/// Maximum allowable shift between a template and a query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ShiftWindow {
    pub di_max: usize,
    pub dj_max: usize,
}

impl ShiftWindow {
    /// Window used for exact scores.
    pub const EXACT: ShiftWindow = ShiftWindow { di_max: 6, dj_max: 12 };
    /// Window used for approximate scores.
    pub const APPROX: ShiftWindow = ShiftWindow { di_max: 2, dj_max: 4 };

    pub const fn new(di_max: usize, dj_max: usize) -> Self {
        Self { di_max, dj_max }
    }

    pub fn check(&self, h: usize, w: usize) -> Result<()> {
        if self.di_max < h && self.dj_max < w {
            Ok(())
        } else {
            Err(Error::WindowTooLarge { di_max: self.di_max, dj_max: self.dj_max, h, w })
        }
    }

    pub fn rows(&self) -> usize {
        2 * self.di_max + 1
    }

    pub fn cols(&self) -> usize {
        2 * self.dj_max + 1
    }

    pub fn len(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All shifts, row-major from `(-di_max, -dj_max)`.
    pub fn shifts(&self) -> impl Iterator<Item = (isize, isize)> {
        let (di, dj) = (self.di_max as isize, self.dj_max as isize);
        (-di..=di).flat_map(move |a| (-dj..=dj).map(move |b| (a, b)))
    }
}

/// Correlation values indexed by shift over a [`ShiftWindow`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShiftTable {
    window: ShiftWindow,
    values: Vec<u64>,
}

impl ShiftTable {
    pub(crate) fn from_fn(window: ShiftWindow, mut f: impl FnMut(isize, isize) -> u64) -> Self {
        let values = window.shifts().map(|(a, b)| f(a, b)).collect();
        Self { window, values }
    }

    pub fn window(&self) -> ShiftWindow {
        self.window
    }

    pub fn get(&self, di: isize, dj: isize) -> u64 {
        let w = self.window;
        assert!(di.unsigned_abs() <= w.di_max && dj.unsigned_abs() <= w.dj_max, "shift outside window");
        let r = (di + w.di_max as isize) as usize;
        let c = (dj + w.dj_max as isize) as usize;
        self.values[r * w.cols() + c]
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn max(&self) -> u64 {
        self.values.iter().copied().max().unwrap_or(0)
    }

    pub fn min(&self) -> u64 {
        self.values.iter().copied().min().unwrap_or(0)
    }
}

/// An `h x w` biometric feature image with optional zero-padded margins.
///
/// Pixels are small nonnegative integers (binary for vein patterns). When
/// `padded`, the top/bottom `pad_i` rows and left/right `pad_j` columns are zero.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BioImage {
    h: usize,
    w: usize,
    pixels: Vec<u16>,
    pad_i: usize,
    pad_j: usize,
    padded: bool,
}

impl BioImage {
    pub fn new(h: usize, w: usize, pixels: Vec<u16>) -> Result<Self> {
        if pixels.len() != h * w {
            return Err(Error::LengthMismatch { expected: h * w, found: pixels.len() });
        }
        Ok(Self { h, w, pixels, pad_i: 0, pad_j: 0, padded: false })
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        Self { h, w, pixels: vec![0; h * w], pad_i: 0, pad_j: 0, padded: false }
    }

    pub fn from_fn(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> u16) -> Self {
        let pixels = (0..h * w).map(|k| f(k / w, k % w)).collect();
        Self { h, w, pixels, pad_i: 0, pad_j: 0, padded: false }
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

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u16 {
        self.pixels[i * self.w + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: u16) {
        self.pixels[i * self.w + j] = v;
    }

    pub fn is_padded(&self) -> bool {
        self.padded
    }

    pub fn pads(&self) -> (usize, usize) {
        (self.pad_i, self.pad_j)
    }

    /// Row and column ranges of the feature region (the whole image when unpadded).
    pub fn interior(&self) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        (
            self.pad_i..self.h.saturating_sub(self.pad_i),
            self.pad_j..self.w.saturating_sub(self.pad_j),
        )
    }

    pub fn in_interior(&self, i: usize, j: usize) -> bool {
        let (rows, cols) = self.interior();
        rows.contains(&i) && cols.contains(&j)
    }

    /// Zeroes `win.di_max` rows at top and bottom and `win.dj_max` columns at
    /// left and right, and marks the image padded.
    pub fn zero_padded(&self, win: ShiftWindow) -> Self {
        let mut out = self.clone();
        out.pad_i = win.di_max;
        out.pad_j = win.dj_max;
        out.padded = true;
        for i in 0..self.h {
            for j in 0..self.w {
                if !out.in_interior(i, j) {
                    out.pixels[i * self.w + j] = 0;
                }
            }
        }
        out
    }

    /// `out[i, j] = self[h-1-i, w-1-j]`.
    pub fn flip(&self) -> Self {
        let mut out = self.clone();
        out.pixels.reverse();
        out
    }

    /// Binary complement of the feature region; padding stays zero.
    pub fn complement(&self) -> Result<Self> {
        self.ensure_binary()?;
        let mut out = self.clone();
        for i in 0..self.h {
            for j in 0..self.w {
                let k = i * self.w + j;
                out.pixels[k] = if self.in_interior(i, j) { 1 - self.pixels[k] } else { 0 };
            }
        }
        Ok(out)
    }

    pub fn is_binary(&self) -> bool {
        self.pixels.iter().all(|&v| v <= 1)
    }

    pub fn ensure_binary(&self) -> Result<()> {
        match self.pixels.iter().position(|&v| v > 1) {
            None => Ok(()),
            Some(index) => Err(Error::NotBinary { index, value: self.pixels[index] }),
        }
    }

    pub fn count_ones(&self) -> usize {
        self.pixels.iter().filter(|&&v| v != 0).count()
    }

    /// Lifts the pixels into ℤ_p; every pixel must be below `p`.
    pub fn to_matrix<W: Word>(&self, field: &Field<W>) -> Result<GfMatrix<W>> {
        let p = field.modulus().as_u64();
        let data = self
            .pixels
            .iter()
            .enumerate()
            .map(|(index, &v)| {
                if (v as u64) < p {
                    Ok(W::from_u64(v as u64).expect("pixel below p fits"))
                } else {
                    Err(Error::PixelOutOfRange { index, value: v as u64, p })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        GfMatrix::from_vec(self.h, self.w, data)
    }

    /// Cyclic shift: `out[i, j] = self[i - di, j - dj]`.
    pub fn shifted(&self, di: isize, dj: isize) -> Self {
        let (h, w) = (self.h as isize, self.w as isize);
        let mut out = BioImage::zeros(self.h, self.w);
        for i in 0..h {
            for j in 0..w {
                let si = (i - di).rem_euclid(h) as usize;
                let sj = (j - dj).rem_euclid(w) as usize;
                out.pixels[(i * w + j) as usize] = self.get(si, sj);
            }
        }
        out
    }
}
