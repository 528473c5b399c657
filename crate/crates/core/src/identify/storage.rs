//! Binary containers for the database (server side) and the key store
//! (client side). All integers are little-endian; field elements are stored
//! as `u16`, so `p` must not exceed 65536.
//!
//! Database: header, header SHA-256, then `N` fixed-size records each
//! followed by the SHA-256 of its bytes.
//!
//! ```text
//! header   magic "CIRFDB\0\0" | version u16 | p u64 | alpha u64 | beta u64
//!          | h u32 | w u32 | k u32 | scenario u8 (0 individual, 1 common)
//!          | reserved u8 | N u32
//! record   id u64 | anchor u8 | reserved u8
//!          | per finger: t[h*w] | t_bar[h*w] | t_alpha[k][h] | t_beta[k][w]
//!                        | anchor_t_alpha[h] | anchor_t_beta[w]   (zero unless anchor)
//! ```
//!
//! Key store: header `"CIRFKEYS" | version u16 | p u64 | h u32 | w u32 | k u32 |
//! scenario u8 | reserved u8 | anchor_record u32 (u32::MAX if none) |
//! entries u32`, then both fingers' anchor filters `r'_alpha[h] | r'_beta[w]`,
//! then per entry and finger `r1[h*w] | r2[h*w] | r_alpha[k][h] | r_beta[k][w]`,
//! then the SHA-256 of everything before it.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{Database, EnrollRecord, FingerKeys, FingerRecord, KeyStore, Scenario, FINGERS};
use crate::cirf::{TemplateParam, TransformedTemplate};
use crate::error::{Error, Result};
use crate::gf::{Axis, GfMatrix, GfParams, Word};
use crate::index::{AnchorParam, IndexParam, TransformedIndex};

pub const DB_VERSION: u16 = 1;
pub const KEYS_VERSION: u16 = 1;
const DB_MAGIC: &[u8; 8] = b"CIRFDB\0\0";
const KEYS_MAGIC: &[u8; 8] = b"CIRFKEYS";
const DB_HEADER_LEN: usize = 8 + 2 + 8 * 3 + 4 * 3 + 2 + 4;
const DIGEST_LEN: usize = 32;

fn check_width<W: Word>(params: &GfParams<W>) -> Result<()> {
    let p = params.p().as_u64();
    if p > 1 << 16 {
        return Err(Error::ModulusTooWide { p, bits: 16 });
    }
    Ok(())
}

#[derive(Default)]
struct Out(Vec<u8>);

impl Out {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn elems<W: Word>(&mut self, v: &[W]) {
        for x in v {
            self.u16(x.as_u64() as u16);
        }
    }
    fn zeros(&mut self, n: usize) {
        self.0.resize(self.0.len() + 2 * n, 0);
    }
    fn digest_from(&mut self, start: usize) {
        let d = Sha256::digest(&self.0[start..]);
        self.0.extend_from_slice(&d);
    }
}

/// Reader over a byte slice; `fail` shapes the error for a short read or a
/// bad value at a given absolute offset.
struct In<'a, F: Fn(u64, String) -> Error> {
    bytes: &'a [u8],
    pos: usize,
    fail: F,
}

impl<'a, F: Fn(u64, String) -> Error> In<'a, F> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| (self.fail)(self.pos as u64, "unexpected end of data".into()))?;
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn elems<W: Word>(&mut self, n: usize, p: u64) -> Result<Vec<W>> {
        (0..n)
            .map(|_| {
                let at = self.pos as u64;
                let v = self.u16()? as u64;
                if v >= p {
                    return Err((self.fail)(at, format!("value {v} is not below p = {p}")));
                }
                Ok(W::from_u64(v).expect("below p"))
            })
            .collect()
    }
    fn cols<W: Word>(&mut self, k: usize, len: usize, p: u64) -> Result<Vec<Vec<W>>> {
        (0..k).map(|_| self.elems(len, p)).collect()
    }
    fn matrix<W: Word>(&mut self, h: usize, w: usize, p: u64) -> Result<GfMatrix<W>> {
        GfMatrix::from_vec(h, w, self.elems(h * w, p)?)
    }
}

fn record_len(h: usize, w: usize, k: usize) -> usize {
    10 + FINGERS * 2 * (2 * h * w + (k + 1) * (h + w)) + DIGEST_LEN
}

pub fn save_database<W: Word>(db: &Database<W>, path: &Path) -> Result<()> {
    check_width(&db.params)?;
    let (h, w) = db.params.shape();
    let mut out = Out::default();
    out.0.extend_from_slice(DB_MAGIC);
    out.u16(DB_VERSION);
    out.u64(db.params.p().as_u64());
    out.u64(db.params.alpha().as_u64());
    out.u64(db.params.beta().as_u64());
    out.u32(h as u32);
    out.u32(w as u32);
    out.u32(db.k as u32);
    out.u8(db.scenario.tag());
    out.u8(0);
    out.u32(db.records.len() as u32);
    out.digest_from(0);
    for rec in &db.records {
        let start = out.0.len();
        out.u64(rec.id);
        out.u8(rec.anchor as u8);
        out.u8(0);
        for f in &rec.fingers {
            out.elems(f.template.t().as_slice());
            out.elems(f.template.t_bar().as_slice());
            for axis in [Axis::Height, Axis::Width] {
                for v in f.index.vectors(axis) {
                    out.elems(v);
                }
            }
            match (f.index.anchor(Axis::Height), f.index.anchor(Axis::Width)) {
                (Some(a), Some(b)) => {
                    out.elems(a);
                    out.elems(b);
                }
                _ => out.zeros(h + w),
            }
        }
        out.digest_from(start);
    }
    fs::write(path, out.0)?;
    Ok(())
}

pub fn load_database<W: Word>(path: &Path) -> Result<Database<W>> {
    let bytes = fs::read(path)?;
    let header_fail = |at: u64, why: String| Error::CorruptHeader(format!("byte {at}: {why}"));
    let mut hd = In { bytes: &bytes, pos: 0, fail: header_fail };
    if hd.take(8)? != DB_MAGIC {
        return Err(Error::CorruptHeader("bad magic bytes".into()));
    }
    let version = hd.u16()?;
    if version != DB_VERSION {
        return Err(Error::FormatVersionMismatch { found: version, expected: DB_VERSION });
    }
    let (p, alpha, beta) = (hd.u64()?, hd.u64()?, hd.u64()?);
    let (h, w, k) = (hd.u32()? as usize, hd.u32()? as usize, hd.u32()? as usize);
    let tag = hd.u8()?;
    hd.u8()?;
    let n = hd.u32()? as usize;
    let digest = hd.take(DIGEST_LEN)?;
    if Sha256::digest(&bytes[..DB_HEADER_LEN]).as_slice() != digest {
        return Err(Error::CorruptHeader("header checksum mismatch".into()));
    }
    let scenario = Scenario::from_tag(tag).ok_or_else(|| Error::CorruptHeader(format!("unknown scenario tag {tag}")))?;
    let params = GfParams::<W>::validate(p, alpha, beta, h, w)
        .map_err(|e| Error::CorruptHeader(format!("invalid field parameters: {e}")))?;
    if k == 0 || k > h.min(w) {
        return Err(Error::CorruptHeader(format!("invalid rank {k}")));
    }
    let body = DB_HEADER_LEN + DIGEST_LEN;
    let rec_len = record_len(h, w, k);
    if bytes.len() != body + n * rec_len {
        return Err(Error::CorruptHeader(format!(
            "file is {} bytes but the header describes {} records ({} bytes)",
            bytes.len(),
            n,
            body + n * rec_len
        )));
    }
    let mut records = Vec::with_capacity(n);
    for record in 0..n {
        let start = body + record * rec_len;
        let end = start + rec_len - DIGEST_LEN;
        if Sha256::digest(&bytes[start..end]).as_slice() != &bytes[end..end + DIGEST_LEN] {
            return Err(Error::CorruptRecord { record, offset: start as u64, reason: "checksum mismatch".into() });
        }
        let fail = |offset: u64, reason: String| Error::CorruptRecord { record, offset, reason };
        let mut r = In { bytes: &bytes[..end], pos: start, fail };
        let id = r.u64()?;
        let anchor = match r.u8()? {
            0 => false,
            1 => true,
            v => return Err(fail(start as u64 + 8, format!("anchor flag {v}"))),
        };
        r.u8()?;
        let mut fingers = Vec::with_capacity(FINGERS);
        for _ in 0..FINGERS {
            let t = r.matrix(h, w, p)?;
            let t_bar = r.matrix(h, w, p)?;
            let t_alpha = r.cols(k, h, p)?;
            let t_beta = r.cols(k, w, p)?;
            let (a, b) = (r.elems(h, p)?, r.elems(w, p)?);
            let anchor_t = anchor.then_some((a, b));
            fingers.push(FingerRecord {
                template: TransformedTemplate::from_parts(t, t_bar)?,
                index: TransformedIndex::from_parts(t_alpha, t_beta, anchor_t)?,
            });
        }
        let fingers: [FingerRecord<W>; FINGERS] = fingers.try_into().expect("two fingers");
        records.push(EnrollRecord { id, fingers, anchor });
    }
    let anchors = records.iter().filter(|r| r.anchor).count();
    if n > 0 && anchors != 1 {
        return Err(Error::CorruptHeader(format!("{anchors} anchor records, expected exactly one")));
    }
    Ok(Database::from_parts(params, k, scenario, records))
}

pub fn save_keys<W: Word>(keys: &KeyStore<W>, params: &GfParams<W>, path: &Path) -> Result<()> {
    check_width(params)?;
    let mut out = Out::default();
    out.0.extend_from_slice(KEYS_MAGIC);
    out.u16(KEYS_VERSION);
    out.u64(params.p().as_u64());
    out.u32(params.h() as u32);
    out.u32(params.w() as u32);
    out.u32(keys.k as u32);
    out.u8(keys.scenario.tag());
    out.u8(0);
    out.u32(keys.anchor_record.map_or(u32::MAX, |a| a as u32));
    out.u32(keys.entries.len() as u32);
    for a in &keys.anchor {
        out.elems(a.filter(Axis::Height));
        out.elems(a.filter(Axis::Width));
    }
    for entry in &keys.entries {
        for fk in entry {
            out.elems(fk.template.r1().as_slice());
            out.elems(fk.template.r2().as_slice());
            for axis in [Axis::Height, Axis::Width] {
                for v in fk.index.filters(axis) {
                    out.elems(v);
                }
            }
        }
    }
    out.digest_from(0);
    fs::write(path, out.0)?;
    Ok(())
}

/// Loads a key store written for `params`.
pub fn load_keys<W: Word>(params: &GfParams<W>, path: &Path) -> Result<KeyStore<W>> {
    let bytes = fs::read(path)?;
    if bytes.len() < DIGEST_LEN {
        return Err(Error::CorruptHeader("key file too short".into()));
    }
    let split = bytes.len() - DIGEST_LEN;
    if Sha256::digest(&bytes[..split]).as_slice() != &bytes[split..] {
        return Err(Error::CorruptHeader("key file checksum mismatch".into()));
    }
    let fail = |at: u64, why: String| Error::CorruptHeader(format!("key file byte {at}: {why}"));
    let mut r = In { bytes: &bytes[..split], pos: 0, fail };
    if r.take(8)? != KEYS_MAGIC {
        return Err(Error::CorruptHeader("bad magic bytes".into()));
    }
    let version = r.u16()?;
    if version != KEYS_VERSION {
        return Err(Error::FormatVersionMismatch { found: version, expected: KEYS_VERSION });
    }
    let p = r.u64()?;
    let (h, w, k) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
    if p != params.p().as_u64() || (h, w) != params.shape() {
        return Err(Error::CorruptHeader("key file was written for different field parameters".into()));
    }
    let tag = r.u8()?;
    let scenario = Scenario::from_tag(tag).ok_or_else(|| Error::CorruptHeader(format!("unknown scenario tag {tag}")))?;
    r.u8()?;
    let anchor_record = match r.u32()? {
        u32::MAX => None,
        a => Some(a as usize),
    };
    let count = r.u32()? as usize;
    let mut anchor = Vec::with_capacity(FINGERS);
    for _ in 0..FINGERS {
        anchor.push(AnchorParam::from_filters(r.elems(h, p)?, r.elems(w, p)?)?);
    }
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let mut fks = Vec::with_capacity(FINGERS);
        for _ in 0..FINGERS {
            let template = TemplateParam::from_filters(r.matrix(h, w, p)?, r.matrix(h, w, p)?)?;
            let index = IndexParam::from_filters(r.cols(k, h, p)?, r.cols(k, w, p)?)?;
            fks.push(FingerKeys { template, index });
        }
        entries.push(fks.try_into().expect("two fingers"));
    }
    if r.pos != split {
        return Err(Error::CorruptHeader("trailing bytes in key file".into()));
    }
    let anchor: [AnchorParam<W>; FINGERS] = anchor.try_into().expect("two fingers");
    Ok(KeyStore::from_parts(scenario, k, anchor, anchor_record, entries))
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;
    use crate::synth::{generate_corpus, zero_pad, CorpusSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_db(scenario: Scenario) -> (NttEngine<u32>, Database<u32>, KeyStore<u32>) {
        let engine = NttEngine::new(GfParams::reference());
        let corpus = generate_corpus(&CorpusSpec { subjects: 3, seed: 2, ..CorpusSpec::default() }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut db = Database::new(*engine.params(), 2, scenario);
        let mut keys = KeyStore::new(engine.params(), 2, scenario, &mut rng);
        for s in 0..3 {
            let l = zero_pad(corpus.get(s, 0, 0), ShiftWindow::EXACT);
            let r = zero_pad(corpus.get(s, 1, 0), ShiftWindow::EXACT);
            enroll(&engine, &mut db, &mut keys, 100 + s as u64, [&l, &r], &mut rng).unwrap();
        }
        (engine, db, keys)
    }

    #[test]
    fn round_trips_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        for scenario in [Scenario::Individual, Scenario::Common] {
            let (engine, db, keys) = small_db(scenario);
            let dbp = dir.path().join("db.bin");
            let kp = dir.path().join("keys.bin");
            save_database(&db, &dbp).unwrap();
            save_keys(&keys, engine.params(), &kp).unwrap();
            let loaded = load_database::<u32>(&dbp).unwrap();
            assert_eq!(loaded, db);
            assert_eq!(load_keys(engine.params(), &kp).unwrap(), keys);
            let first = fs::read(&dbp).unwrap();
            save_database(&loaded, &dbp).unwrap();
            assert_eq!(fs::read(&dbp).unwrap(), first);
            assert_eq!(first.len(), DB_HEADER_LEN + DIGEST_LEN + 3 * record_len(32, 64, 2));
        }
    }

    #[test]
    fn corruption_is_located() {
        let dir = tempfile::tempdir().unwrap();
        let (_, db, _) = small_db(Scenario::Individual);
        let path = dir.path().join("db.bin");
        save_database(&db, &path).unwrap();
        let clean = fs::read(&path).unwrap();
        let second = DB_HEADER_LEN + DIGEST_LEN + record_len(32, 64, 2);
        let mut bad = clean.clone();
        bad[second + 500] ^= 1;
        fs::write(&path, &bad).unwrap();
        match load_database::<u32>(&path) {
            Err(Error::CorruptRecord { record, offset, .. }) => {
                assert_eq!(record, 1);
                assert_eq!(offset, second as u64);
            }
            other => panic!("unexpected {other:?}"),
        }
        let mut bad = clean.clone();
        bad[12] ^= 1;
        fs::write(&path, &bad).unwrap();
        assert!(matches!(load_database::<u32>(&path), Err(Error::CorruptHeader(_))));
        fs::write(&path, &clean[..clean.len() - 3]).unwrap();
        assert!(matches!(load_database::<u32>(&path), Err(Error::CorruptHeader(_))));
    }
}
