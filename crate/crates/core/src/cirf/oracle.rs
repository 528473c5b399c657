//! Direct evaluations of cyclic cross-correlation and overlapped Hamming
//! distance. These share no code with the transform path and serve as the
//! reference for it.

use super::image::{BioImage, ShiftTable, ShiftWindow};

/// `(X ⋆ Y)[Δi, Δj] = Σ_{i,j} X[i,j] · Y[(i+Δi) mod h, (j+Δj) mod w]`.
pub fn cyclic_corr_at(x: &BioImage, y: &BioImage, di: isize, dj: isize) -> u64 {
    assert_eq!(x.shape(), y.shape(), "image shapes differ");
    let (h, w) = (x.h() as isize, x.w() as isize);
    let mut acc = 0u64;
    for i in 0..h {
        let yi = (i + di).rem_euclid(h) as usize;
        for j in 0..w {
            let xv = x.get(i as usize, j as usize) as u64;
            if xv != 0 {
                acc += xv * y.get(yi, (j + dj).rem_euclid(w) as usize) as u64;
            }
        }
    }
    acc
}

/// Correlation over every shift of `win`.
pub fn brute_corr(x: &BioImage, y: &BioImage, win: ShiftWindow) -> ShiftTable {
    ShiftTable::from_fn(win, |di, dj| cyclic_corr_at(x, y, di, dj))
}

/// Correlation over all `h x w` shifts, indexed `[Δi * w + Δj]` with
/// `0 <= Δi < h`, `0 <= Δj < w`.
pub fn brute_corr_full(x: &BioImage, y: &BioImage) -> Vec<u64> {
    let (h, w) = x.shape();
    (0..h * w)
        .map(|k| cyclic_corr_at(x, y, (k / w) as isize, (k % w) as isize))
        .collect()
}

/// Mismatches between the feature region of `x` and `y` shifted by `(Δi, Δj)`.
pub fn hamming_at(x: &BioImage, y: &BioImage, di: isize, dj: isize) -> u64 {
    let (h, w) = (x.h() as isize, x.w() as isize);
    let (rows, cols) = x.interior();
    let mut count = 0;
    for i in rows {
        let yi = (i as isize + di).rem_euclid(h) as usize;
        for j in cols.clone() {
            let yj = (j as isize + dj).rem_euclid(w) as usize;
            if x.get(i, j) != y.get(yi, yj) {
                count += 1;
            }
        }
    }
    count
}

/// Minimum overlapped Hamming distance over the window.
pub fn brute_min_hamming(x: &BioImage, y: &BioImage, win: ShiftWindow) -> u64 {
    win.shifts().map(|(di, dj)| hamming_at(x, y, di, dj)).min().expect("window is nonempty")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_and_delta() {
        let z = BioImage::zeros(8, 16);
        assert!(brute_corr(&z, &z, ShiftWindow::new(2, 4)).values().iter().all(|&v| v == 0));
        assert_eq!(brute_min_hamming(&z, &z, ShiftWindow::new(2, 4)), 0);
        let mut d = BioImage::zeros(8, 16);
        d.set(3, 7, 1);
        let t = brute_corr(&d, &d, ShiftWindow::new(3, 7));
        assert_eq!(t.get(0, 0), 1);
        assert_eq!(t.values().iter().sum::<u64>(), 1);
    }

    #[test]
    fn shifted_copy_peaks_at_shift() {
        let x = BioImage::from_fn(8, 16, |i, j| ((i * 7 + j * 3) % 5 == 0) as u16);
        let y = x.shifted(2, -3);
        // Y[i+2, j-3] = X[i, j]
        assert_eq!(hamming_at(&x, &y, 2, -3), 0);
        assert_eq!(cyclic_corr_at(&x, &y, 2, -3), x.count_ones() as u64);
        assert_eq!(brute_corr_full(&x, &y)[2 * 16 + 13], x.count_ones() as u64);
    }
}
