use std::ops::{Index, IndexMut};

use super::field::Field;
use super::word::Word;
use crate::error::{Error, Result};

/// Dense row-major matrix of field elements.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GfMatrix<W: Word> {
    rows: usize,
    cols: usize,
    data: Vec<W>,
}

impl<W: Word> GfMatrix<W> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![W::zero(); rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: W) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<W>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch { expected: rows * cols, found: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> W) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[W] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [W] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<W> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[W] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<W> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[W]) {
        debug_assert_eq!(values.len(), self.rows);
        for (i, &v) in values.iter().enumerate() {
            self.data[i * self.cols + j] = v;
        }
    }

    pub fn ensure_shape(&self, expected: (usize, usize)) -> Result<()> {
        if self.shape() == expected {
            Ok(())
        } else {
            Err(Error::ShapeMismatch { expected, found: self.shape() })
        }
    }

    /// Element-wise product; shapes must agree.
    pub fn hadamard(&self, other: &Self, field: &Field<W>) -> Result<Self> {
        other.ensure_shape(self.shape())?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: hadamard(field, &self.data, &other.data)?,
        })
    }

    /// Element-wise inverse; fails on the first zero entry.
    pub fn hadamard_inv(&self, field: &Field<W>) -> Result<Self> {
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: hadamard_inv(field, &self.data)?,
        })
    }

    /// Index of the first zero entry, if any.
    pub fn first_zero(&self) -> Option<usize> {
        self.data.iter().position(|v| v.is_zero())
    }
}

impl<W: Word> Index<(usize, usize)> for GfMatrix<W> {
    type Output = W;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &W {
        &self.data[i * self.cols + j]
    }
}

impl<W: Word> IndexMut<(usize, usize)> for GfMatrix<W> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut W {
        &mut self.data[i * self.cols + j]
    }
}

/// Pixel-wise product of two equally sized vectors.
pub fn hadamard<W: Word>(field: &Field<W>, a: &[W], b: &[W]) -> Result<Vec<W>> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { expected: a.len(), found: b.len() });
    }
    Ok(a.iter().zip(b).map(|(&x, &y)| field.mul(x, y)).collect())
}

/// Pixel-wise inverse, computed with a single field inversion
/// (prefix products, then unwinding).
pub fn hadamard_inv<W: Word>(field: &Field<W>, a: &[W]) -> Result<Vec<W>> {
    if let Some(index) = a.iter().position(|v| v.is_zero()) {
        return Err(Error::ZeroElement { index });
    }
    let mut prefix = Vec::with_capacity(a.len());
    let mut acc = W::one();
    for &x in a {
        prefix.push(acc);
        acc = field.mul(acc, x);
    }
    let mut inv_acc = field.inv(acc).ok_or(Error::ZeroElement { index: 0 })?;
    let mut out = vec![W::zero(); a.len()];
    for i in (0..a.len()).rev() {
        out[i] = field.mul(inv_acc, prefix[i]);
        inv_acc = field.mul(inv_acc, a[i]);
    }
    Ok(out)
}
