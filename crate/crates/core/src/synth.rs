//! Synthetic vein-like binary images: genuine pairs differ by a bounded cyclic
//! shift and independent pixel flips.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cirf::{BioImage, ShiftWindow};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"CIRFDSET";
pub const DATASET_VERSION: u16 = 1;
/// Bytes before the first image.
pub const DATASET_HEADER_LEN: usize = 8 + 2 + 4 * 5 + 8 + 4 + 8 + 4 * 4;

/// Generation controls. Defaults give 32x64 images, 2 fingers, 2 samples.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSpec {
    pub subjects: usize,
    pub fingers_per_subject: usize,
    pub samples_per_finger: usize,
    pub h: usize,
    pub w: usize,
    /// Inclusive range of curves per image.
    pub curve_count: (u8, u8),
    /// Inclusive range of stroke thickness in pixels.
    pub curve_thickness: (u8, u8),
    pub pixel_flip_noise: f64,
    pub genuine_shift_range: ShiftWindow,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            subjects: 100,
            fingers_per_subject: 2,
            samples_per_finger: 2,
            h: 32,
            w: 64,
            curve_count: (3, 6),
            curve_thickness: (1, 2),
            pixel_flip_noise: 0.03,
            genuine_shift_range: ShiftWindow::APPROX,
            seed: 0,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.h == 0 || self.w == 0 || self.fingers_per_subject == 0 || self.samples_per_finger == 0 {
            return bad("geometry and per-subject counts must be positive");
        }
        if self.curve_count.0 > self.curve_count.1 || self.curve_thickness.0 > self.curve_thickness.1 {
            return bad("curve ranges must be ordered");
        }
        if self.curve_thickness.0 == 0 {
            return bad("curve thickness must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.pixel_flip_noise) {
            return bad("pixel_flip_noise must lie in [0, 1]");
        }
        let s = self.genuine_shift_range;
        let e = ShiftWindow::EXACT;
        if s.di_max > e.di_max || s.dj_max > e.dj_max {
            return bad("genuine_shift_range exceeds the exact matching window");
        }
        s.check(self.h, self.w)
    }

    pub fn images_per_subject(&self) -> usize {
        self.fingers_per_subject * self.samples_per_finger
    }

    /// File size of a saved corpus.
    pub fn file_len(&self) -> usize {
        DATASET_HEADER_LEN + self.subjects * self.images_per_subject() * (self.h * self.w).div_ceil(8)
    }
}

/// Generated images, indexed by `(subject, finger, sample)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    spec: CorpusSpec,
    images: Vec<BioImage>,
}

impl Corpus {
    pub fn spec(&self) -> &CorpusSpec {
        &self.spec
    }

    pub fn subjects(&self) -> usize {
        self.spec.subjects
    }

    pub fn get(&self, subject: usize, finger: usize, sample: usize) -> &BioImage {
        let s = &self.spec;
        &self.images[(subject * s.fingers_per_subject + finger) * s.samples_per_finger + sample]
    }

    pub fn images(&self) -> &[BioImage] {
        &self.images
    }

    /// Keeps the first `n` subjects.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.spec.subjects);
        let spec = CorpusSpec { subjects: n, ..self.spec.clone() };
        Self { images: self.images[..n * spec.images_per_subject()].to_vec(), spec }
    }
}

fn subject_rng(seed: u64, subject: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(subject as u64);
    rng
}

fn stamp(img: &mut BioImage, i: isize, j: isize, thickness: u8) {
    let (h, w) = (img.h() as isize, img.w() as isize);
    for a in 0..thickness as isize {
        for b in 0..thickness as isize {
            let (y, x) = (i + a, j + b);
            if (0..h).contains(&y) && (0..w).contains(&x) {
                img.set(y as usize, x as usize, 1);
            }
        }
    }
}

/// One cubic stroke `y = c0 + c1 t + c2 t² + c3 t³` (mostly running along the
/// width), sampled densely and stamped with the given thickness.
fn draw_curve<R: Rng>(img: &mut BioImage, rng: &mut R, thickness: u8) {
    let (h, w) = (img.h() as f64, img.w() as f64);
    let along = rng.gen_bool(0.75);
    let (len, span) = if along { (w, h) } else { (h, w) };
    let start = rng.gen_range(0.0..len * 0.3);
    let end = rng.gen_range(len * 0.6..len);
    let c0 = rng.gen_range(0.0..span);
    let c1 = rng.gen_range(-0.6..0.6);
    let c2 = rng.gen_range(-0.03..0.03);
    let c3 = rng.gen_range(-0.0008..0.0008);
    let steps = ((end - start) * 3.0) as usize + 1;
    for s in 0..=steps {
        let t = start + (end - start) * s as f64 / steps as f64;
        let u = t - start;
        let y = c0 + c1 * u + c2 * u * u + c3 * u * u * u;
        let (i, j) = if along { (y, t) } else { (t, y) };
        stamp(img, i.round() as isize, j.round() as isize, thickness);
    }
}

fn base_image<R: Rng>(spec: &CorpusSpec, rng: &mut R) -> BioImage {
    let mut img = BioImage::zeros(spec.h, spec.w);
    for _ in 0..rng.gen_range(spec.curve_count.0..=spec.curve_count.1) {
        let thickness = rng.gen_range(spec.curve_thickness.0..=spec.curve_thickness.1);
        draw_curve(&mut img, rng, thickness);
    }
    img
}

fn noisy_copy<R: Rng>(spec: &CorpusSpec, base: &BioImage, rng: &mut R) -> BioImage {
    let s = spec.genuine_shift_range;
    let di = rng.gen_range(-(s.di_max as isize)..=s.di_max as isize);
    let dj = rng.gen_range(-(s.dj_max as isize)..=s.dj_max as isize);
    let mut out = base.shifted(di, dj);
    if spec.pixel_flip_noise > 0.0 {
        for i in 0..spec.h {
            for j in 0..spec.w {
                if rng.gen_bool(spec.pixel_flip_noise) {
                    out.set(i, j, 1 - out.get(i, j));
                }
            }
        }
    }
    out
}

/// Deterministic for a given spec; subjects draw from independent streams,
/// so the parallel split does not affect the output.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Corpus> {
    spec.validate()?;
    let per_subject: Vec<Vec<BioImage>> = (0..spec.subjects)
        .into_par_iter()
        .map(|subject| {
            let mut rng = subject_rng(spec.seed, subject);
            let mut out = Vec::with_capacity(spec.images_per_subject());
            for _ in 0..spec.fingers_per_subject {
                let base = base_image(spec, &mut rng);
                for _ in 1..spec.samples_per_finger {
                    out.push(noisy_copy(spec, &base, &mut rng));
                }
                out.insert(out.len() + 1 - spec.samples_per_finger, base);
            }
            out
        })
        .collect();
    Ok(Corpus { spec: spec.clone(), images: per_subject.into_iter().flatten().collect() })
}

/// Zeroes the margins given by `win` and marks the image padded.
pub fn zero_pad(image: &BioImage, win: ShiftWindow) -> BioImage {
    image.zero_padded(win)
}

fn pack(img: &BioImage) -> Vec<u8> {
    let mut out = vec![0u8; img.pixels().len().div_ceil(8)];
    for (k, &v) in img.pixels().iter().enumerate() {
        if v != 0 {
            out[k / 8] |= 0x80 >> (k % 8);
        }
    }
    out
}

fn unpack(h: usize, w: usize, bytes: &[u8]) -> BioImage {
    BioImage::from_fn(h, w, |i, j| {
        let k = i * w + j;
        (bytes[k / 8] >> (7 - k % 8) & 1) as u16
    })
}

/// Writes the corpus: header, then every image at one bit per pixel,
/// row-major, most significant bit first.
pub fn save_dataset(corpus: &Corpus, path: &Path) -> Result<()> {
    let s = &corpus.spec;
    if corpus.images.iter().any(|im| !im.is_binary()) {
        return Err(Error::InvalidParameter("dataset images must be binary".into()));
    }
    let mut buf = Vec::with_capacity(s.file_len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    for v in [s.h, s.w, s.subjects, s.fingers_per_subject, s.samples_per_finger] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    buf.extend_from_slice(&s.seed.to_le_bytes());
    buf.extend_from_slice(&[s.curve_count.0, s.curve_count.1, s.curve_thickness.0, s.curve_thickness.1]);
    buf.extend_from_slice(&s.pixel_flip_noise.to_le_bytes());
    for v in [s.genuine_shift_range.di_max, s.genuine_shift_range.dj_max, 0, 0] {
        buf.extend_from_slice(&(v as u32).to_le_bytes());
    }
    debug_assert_eq!(buf.len(), DATASET_HEADER_LEN);
    for im in &corpus.images {
        buf.extend_from_slice(&pack(im));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    f.sync_all()?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::CorruptHeader(format!("file ends at byte {} inside the header", self.bytes.len())))?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
}

pub fn load_dataset(path: &Path) -> Result<Corpus> {
    let bytes = fs::read(path)?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    if c.take(8)? != MAGIC {
        return Err(Error::CorruptHeader("bad magic bytes".into()));
    }
    let version = u16::from_le_bytes(c.take(2)?.try_into().expect("2 bytes"));
    if version != DATASET_VERSION {
        return Err(Error::FormatVersionMismatch { found: version, expected: DATASET_VERSION });
    }
    let (h, w, subjects, fingers, samples) = (c.u32()?, c.u32()?, c.u32()?, c.u32()?, c.u32()?);
    let seed = u64::from_le_bytes(c.take(8)?.try_into().expect("8 bytes"));
    let r = c.take(4)?;
    let noise = f64::from_le_bytes(c.take(8)?.try_into().expect("8 bytes"));
    let (di, dj) = (c.u32()?, c.u32()?);
    c.take(8)?;
    let spec = CorpusSpec {
        subjects,
        fingers_per_subject: fingers,
        samples_per_finger: samples,
        h,
        w,
        curve_count: (r[0], r[1]),
        curve_thickness: (r[2], r[3]),
        pixel_flip_noise: noise,
        genuine_shift_range: ShiftWindow::new(di, dj),
        seed,
    };
    spec.validate().map_err(|e| Error::CorruptHeader(format!("invalid header fields: {e}")))?;
    if bytes.len() != spec.file_len() {
        return Err(Error::CorruptHeader(format!(
            "file is {} bytes but the header describes {}",
            bytes.len(),
            spec.file_len()
        )));
    }
    let stride = (h * w).div_ceil(8);
    let images = bytes[DATASET_HEADER_LEN..].chunks_exact(stride).map(|b| unpack(h, w, b)).collect();
    Ok(Corpus { spec, images })
}
