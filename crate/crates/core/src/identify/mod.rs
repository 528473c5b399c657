//! One-to-many identification over two fingers: enrollment into a database
//! of transformed data, ranking by fused approximate scores, and the
//! sort-then-verify walk with fused exact distances.

mod accounting;
mod metrics;
mod storage;

pub use accounting::{audit, payload_size, AuditRow, EquationCount};
pub use metrics::{avg_exact_computations, eer, hit_rate, hit_rate_curve, MetricsReport, Timing};
pub use storage::{load_database, load_keys, save_database, save_keys, DB_VERSION, KEYS_VERSION};

use rand::Rng;
use rayon::prelude::*;

use crate::cirf::{min_hamming_score, BioImage, QuerySpectrum, ShiftWindow, TemplateParam, TransformedQuery, TransformedTemplate};
use crate::error::{Error, Result};
use crate::gf::{GfParams, NttEngine, Word};
use crate::index::{
    approx_score_from_products, transform_index_enroll, AnchorBridge, AnchorParam, IndexParam, QueryIndexSpectra,
    TransformedIndex, TransformedQueryIndex,
};
use crate::lowrank::{check_anchor, ensure_zero_free_spectra, factorize, AnchorCheck};

/// Fingers per enrollee.
pub const FINGERS: usize = 2;

/// Whether filters are drawn per record or shared by all records.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scenario {
    Individual,
    Common,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Individual => "individual",
            Scenario::Common => "common",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        match self {
            Scenario::Individual => 0,
            Scenario::Common => 1,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Scenario::Individual),
            1 => Some(Scenario::Common),
            _ => None,
        }
    }
}

/// What a stored field holds, for auditing that records carry no plaintext.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataKind {
    Identifier,
    Flag,
    TransformedTemplate,
    TransformedIndex,
    PlaintextImage,
    PlaintextIndex,
}

/// Server-side data for one finger.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FingerRecord<W: Word> {
    pub template: TransformedTemplate<W>,
    pub index: TransformedIndex<W>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnrollRecord<W: Word> {
    pub id: u64,
    pub fingers: [FingerRecord<W>; FINGERS],
    pub anchor: bool,
}

impl<W: Word> EnrollRecord<W> {
    /// Every field reachable from a record and what it holds.
    pub const MANIFEST: &'static [(&'static str, DataKind)] = &[
        ("id", DataKind::Identifier),
        ("anchor", DataKind::Flag),
        ("fingers[].template.t", DataKind::TransformedTemplate),
        ("fingers[].template.t_bar", DataKind::TransformedTemplate),
        ("fingers[].index.t_alpha", DataKind::TransformedIndex),
        ("fingers[].index.t_beta", DataKind::TransformedIndex),
        ("fingers[].index.anchor_t", DataKind::TransformedIndex),
    ];
}

/// The authentication server's store.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Database<W: Word> {
    params: GfParams<W>,
    k: usize,
    scenario: Scenario,
    records: Vec<EnrollRecord<W>>,
}

impl<W: Word> Database<W> {
    pub fn new(params: GfParams<W>, k: usize, scenario: Scenario) -> Self {
        Self { params, k, scenario, records: Vec::new() }
    }

    pub(crate) fn from_parts(params: GfParams<W>, k: usize, scenario: Scenario, records: Vec<EnrollRecord<W>>) -> Self {
        Self { params, k, scenario, records }
    }

    pub fn params(&self) -> &GfParams<W> {
        &self.params
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn records(&self) -> &[EnrollRecord<W>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn anchor_position(&self) -> Option<usize> {
        self.records.iter().position(|r| r.anchor)
    }

    /// Stored index field elements over all records and fingers.
    pub fn index_pixels(&self) -> usize {
        self.records.iter().flat_map(|r| &r.fingers).map(|f| f.index.pixel_count()).sum()
    }
}

/// Filters for one finger.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FingerKeys<W: Word> {
    pub template: TemplateParam<W>,
    pub index: IndexParam<W>,
}

impl<W: Word> FingerKeys<W> {
    pub fn random<R: Rng + ?Sized>(params: &GfParams<W>, k: usize, rng: &mut R) -> Self {
        Self { template: TemplateParam::random(params, rng), index: IndexParam::random(params, k, rng) }
    }
}

/// Client-held parameters. In the common scenario `entries` has one element
/// shared by every record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyStore<W: Word> {
    scenario: Scenario,
    k: usize,
    anchor: [AnchorParam<W>; FINGERS],
    anchor_record: Option<usize>,
    entries: Vec<[FingerKeys<W>; FINGERS]>,
}

impl<W: Word> KeyStore<W> {
    pub fn new<R: Rng + ?Sized>(params: &GfParams<W>, k: usize, scenario: Scenario, rng: &mut R) -> Self {
        let anchor = [AnchorParam::random(params, rng), AnchorParam::random(params, rng)];
        let entries = match scenario {
            Scenario::Individual => Vec::new(),
            Scenario::Common => vec![[FingerKeys::random(params, k, rng), FingerKeys::random(params, k, rng)]],
        };
        Self { scenario, k, anchor, anchor_record: None, entries }
    }

    pub(crate) fn from_parts(
        scenario: Scenario,
        k: usize,
        anchor: [AnchorParam<W>; FINGERS],
        anchor_record: Option<usize>,
        entries: Vec<[FingerKeys<W>; FINGERS]>,
    ) -> Self {
        Self { scenario, k, anchor, anchor_record, entries }
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn anchor(&self) -> &[AnchorParam<W>; FINGERS] {
        &self.anchor
    }

    pub fn anchor_record(&self) -> Option<usize> {
        self.anchor_record
    }

    pub fn entries(&self) -> &[[FingerKeys<W>; FINGERS]] {
        &self.entries
    }

    /// Keys used for record `n`.
    pub fn for_record(&self, n: usize) -> &[FingerKeys<W>; FINGERS] {
        match self.scenario {
            Scenario::Individual => &self.entries[n],
            Scenario::Common => &self.entries[0],
        }
    }
}

/// Factorises both fingers; when the database still lacks an anchor, also
/// repairs the spectra so this record can serve as one. `None` means the
/// repair failed and the record must be enrolled as an ordinary one.
fn enroll_indexes<W: Word>(
    engine: &NttEngine<W>,
    images: [&BioImage; FINGERS],
    k: usize,
    seeds: [u64; FINGERS],
    want_anchor: bool,
) -> Result<([crate::lowrank::FactorIndex; FINGERS], bool)> {
    let mut idx = [factorize(images[0], k, seeds[0])?, factorize(images[1], k, seeds[1])?];
    if !want_anchor {
        return Ok((idx, false));
    }
    let mut repaired = idx.clone();
    for f in 0..FINGERS {
        match check_anchor(&idx[f], engine) {
            Ok(AnchorCheck::Clean) => {}
            Ok(AnchorCheck::Dithered(d)) => repaired[f] = d,
            Err(Error::DitherExhausted { .. }) => return Ok((idx, false)),
            Err(e) => return Err(e),
        }
    }
    idx = repaired;
    Ok((idx, true))
}

/// Enrolls one person from zero-padded binary images of both fingers. The
/// first record whose indexes pass the anchor check becomes the anchor.
pub fn enroll<W: Word, R: Rng + ?Sized>(
    engine: &NttEngine<W>,
    db: &mut Database<W>,
    keys: &mut KeyStore<W>,
    id: u64,
    images: [&BioImage; FINGERS],
    rng: &mut R,
) -> Result<()> {
    if keys.scenario != db.scenario {
        return Err(Error::ScenarioMismatch { query: keys.scenario.name(), database: db.scenario.name() });
    }
    if keys.k != db.k {
        return Err(Error::LengthMismatch { expected: db.k, found: keys.k });
    }
    for im in images {
        im.ensure_binary()?;
        if !im.is_padded() {
            return Err(Error::InvalidParameter("enrolled images must be zero-padded".into()));
        }
    }
    let seeds = [rng.gen(), rng.gen()];
    let want_anchor = db.anchor_position().is_none();
    let (idx, is_anchor) = enroll_indexes(engine, images, db.k, seeds, want_anchor)?;
    if keys.scenario == Scenario::Individual {
        keys.entries.push([FingerKeys::random(&db.params, db.k, rng), FingerKeys::random(&db.params, db.k, rng)]);
    }
    let n = db.records.len();
    let fk = keys.for_record(n).clone();
    let mut fingers = Vec::with_capacity(FINGERS);
    for f in 0..FINGERS {
        let anchor = is_anchor.then_some(&keys.anchor[f]);
        fingers.push(FingerRecord {
            template: TransformedTemplate::new(engine, images[f], &fk[f].template)?,
            index: transform_index_enroll(engine, &idx[f], &fk[f].index, anchor)?,
        });
    }
    if is_anchor {
        keys.anchor_record = Some(n);
    }
    let fingers: [FingerRecord<W>; FINGERS] = fingers.try_into().expect("two fingers");
    db.records.push(EnrollRecord { id, fingers, anchor: is_anchor });
    Ok(())
}

/// Query data for one finger and one record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FingerQuery<W: Word> {
    pub template: TransformedQuery<W>,
    pub index: TransformedQueryIndex<W>,
}

/// A query protected under the client's keys; one entry per record in the
/// individual scenario, a single shared entry in the common one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtectedQuery<W: Word> {
    scenario: Scenario,
    entries: Vec<[FingerQuery<W>; FINGERS]>,
}

impl<W: Word> ProtectedQuery<W> {
    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn for_record(&self, n: usize) -> &[FingerQuery<W>; FINGERS] {
        match self.scenario {
            Scenario::Individual => &self.entries[n],
            Scenario::Common => &self.entries[0],
        }
    }
}

/// Factorises each query image once (with `seed`) and keys the result for
/// every record.
pub fn protect_query<W: Word>(
    engine: &NttEngine<W>,
    keys: &KeyStore<W>,
    images: [&BioImage; FINGERS],
    seed: u64,
) -> Result<ProtectedQuery<W>> {
    let field = engine.field();
    let mut spectra = Vec::with_capacity(FINGERS);
    for (f, im) in images.into_iter().enumerate() {
        im.ensure_binary()?;
        let idx = ensure_zero_free_spectra(factorize(im, keys.k, seed.wrapping_add(f as u64))?, engine)?;
        spectra.push((QuerySpectrum::new(engine, im)?, QueryIndexSpectra::new(engine, &idx)?));
    }
    let build = |n: usize| -> Result<[FingerQuery<W>; FINGERS]> {
        let fk = keys.for_record(n);
        let anchored = keys.scenario == Scenario::Common || keys.anchor_record == Some(n);
        let one = |f: usize| -> Result<FingerQuery<W>> {
            let (qs, qi) = &spectra[f];
            Ok(FingerQuery {
                template: qs.protect(field, &fk[f].template)?,
                index: qi.protect(field, &fk[f].index, anchored.then_some(&keys.anchor[f]))?,
            })
        };
        Ok([one(0)?, one(1)?])
    };
    let entries = match keys.scenario {
        Scenario::Common => vec![build(0)?],
        Scenario::Individual => (0..keys.entries.len()).into_par_iter().map(build).collect::<Result<Vec<_>>>()?,
    };
    Ok(ProtectedQuery { scenario: keys.scenario, entries })
}

/// Matching windows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Windows {
    pub exact: ShiftWindow,
    pub approx: ShiftWindow,
}

impl Default for Windows {
    fn default() -> Self {
        Self { exact: ShiftWindow::EXACT, approx: ShiftWindow::APPROX }
    }
}

fn check_query<W: Word>(db: &Database<W>, query: &ProtectedQuery<W>) -> Result<()> {
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    if query.scenario != db.scenario {
        return Err(Error::ScenarioMismatch { query: query.scenario.name(), database: db.scenario.name() });
    }
    if db.scenario == Scenario::Individual && query.entries.len() != db.len() {
        return Err(Error::LengthMismatch { expected: db.len(), found: query.entries.len() });
    }
    Ok(())
}

/// Candidates by fused approximate similarity, highest first, ties by
/// enrollment order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ranking {
    pub order: Vec<usize>,
    pub scores: Vec<u64>,
}

impl Ranking {
    /// Zero-based position of record `n` in the order.
    pub fn rank_of(&self, n: usize) -> Option<usize> {
        self.order.iter().position(|&m| m == n)
    }
}

/// Builds the per-finger bridges from the anchor record.
pub fn anchor_bridges<W: Word>(
    engine: &NttEngine<W>,
    db: &Database<W>,
    query: &ProtectedQuery<W>,
) -> Result<Vec<AnchorBridge<W>>> {
    check_query(db, query)?;
    let a = db.anchor_position().ok_or_else(|| Error::InvalidParameter("database has no anchor record".into()))?;
    let rec = &db.records[a];
    let q = query.for_record(a);
    (0..FINGERS).map(|f| AnchorBridge::new(engine.field(), &rec.fingers[f].index, &q[f].index)).collect()
}

/// Approximate score of one finger of record `n`.
pub fn approx_finger_score<W: Word>(
    engine: &NttEngine<W>,
    bridge: &AnchorBridge<W>,
    record: &FingerRecord<W>,
    query: &FingerQuery<W>,
    win: ShiftWindow,
) -> Result<u64> {
    let products = bridge.products(engine.field(), &record.index, &query.index)?;
    approx_score_from_products(engine, &products, win)
}

/// Exact distance of one finger of a record.
pub fn exact_finger_score<W: Word>(
    engine: &NttEngine<W>,
    record: &FingerRecord<W>,
    query: &FingerQuery<W>,
    win: ShiftWindow,
) -> Result<u64> {
    min_hamming_score(engine, &record.template, &query.template, win)
}

fn fused_exact<W: Word>(
    engine: &NttEngine<W>,
    db: &Database<W>,
    query: &ProtectedQuery<W>,
    n: usize,
    win: ShiftWindow,
) -> Result<u64> {
    let q = query.for_record(n);
    let rec = &db.records[n];
    (0..FINGERS).map(|f| exact_finger_score(engine, &rec.fingers[f], &q[f], win)).sum()
}

/// Fused (summed) approximate scores of every record, sorted.
pub fn rank_candidates<W: Word>(
    engine: &NttEngine<W>,
    db: &Database<W>,
    query: &ProtectedQuery<W>,
    win: ShiftWindow,
) -> Result<Ranking> {
    let bridges = anchor_bridges(engine, db, query)?;
    let scores = (0..db.len())
        .into_par_iter()
        .map(|n| {
            let q = query.for_record(n);
            (0..FINGERS)
                .map(|f| approx_finger_score(engine, &bridges[f], &db.records[n].fingers[f], &q[f], win))
                .sum::<Result<u64>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..db.len()).collect();
    order.sort_by_key(|&n| (std::cmp::Reverse(scores[n]), n));
    Ok(Ranking { order, scores })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Accepted(u64),
    Rejected,
}

impl Decision {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Decision::Accepted(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdentResult {
    pub decision: Decision,
    /// Record position of the accepted enrollee.
    pub accepted_position: Option<usize>,
    /// Fused exact scores evaluated (`N'`).
    pub exact_computations: usize,
    pub visited_order: Vec<usize>,
    pub fused_exact_score: Option<u64>,
}

/// Walks a ranking, accepting the first record whose fused exact distance is
/// below `threshold`.
pub fn verify_in_order<W: Word>(
    engine: &NttEngine<W>,
    db: &Database<W>,
    query: &ProtectedQuery<W>,
    ranking: &Ranking,
    threshold: u64,
    win: ShiftWindow,
) -> Result<IdentResult> {
    check_query(db, query)?;
    for (visited, &n) in ranking.order.iter().enumerate() {
        let d = fused_exact(engine, db, query, n, win)?;
        if d < threshold {
            return Ok(IdentResult {
                decision: Decision::Accepted(db.records[n].id),
                accepted_position: Some(n),
                exact_computations: visited + 1,
                visited_order: ranking.order.clone(),
                fused_exact_score: Some(d),
            });
        }
    }
    Ok(IdentResult {
        decision: Decision::Rejected,
        accepted_position: None,
        exact_computations: db.len(),
        visited_order: ranking.order.clone(),
        fused_exact_score: None,
    })
}

/// Ranks by approximate score, then verifies in that order.
pub fn identify<W: Word>(
    engine: &NttEngine<W>,
    db: &Database<W>,
    query: &ProtectedQuery<W>,
    threshold: u64,
    windows: Windows,
) -> Result<IdentResult> {
    let ranking = rank_candidates(engine, db, query, windows.approx)?;
    verify_in_order(engine, db, query, &ranking, threshold, windows.exact)
}

/// Every fused exact distance, in enrollment order.
pub fn exhaustive_scores<W: Word>(
    engine: &NttEngine<W>,
    db: &Database<W>,
    query: &ProtectedQuery<W>,
    win: ShiftWindow,
) -> Result<Vec<u64>> {
    check_query(db, query)?;
    (0..db.len()).into_par_iter().map(|n| fused_exact(engine, db, query, n, win)).collect()
}

/// Outcome of matching against every record without the index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExhaustiveResult {
    pub decision: Decision,
    /// Positions whose fused distance is below the threshold.
    pub below_threshold: Vec<usize>,
}

/// Accepts iff some record is below `threshold`; the reported identity is
/// the closest record, ties by enrollment order.
pub fn exhaustive_decision<W: Word>(db: &Database<W>, scores: &[u64], threshold: u64) -> ExhaustiveResult {
    let below_threshold: Vec<usize> = (0..scores.len()).filter(|&n| scores[n] < threshold).collect();
    let decision = below_threshold
        .iter()
        .min_by_key(|&&n| (scores[n], n))
        .map_or(Decision::Rejected, |&n| Decision::Accepted(db.records[n].id));
    ExhaustiveResult { decision, below_threshold }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_corpus, zero_pad, CorpusSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize, scenario: Scenario, k: usize) -> (NttEngine<u32>, Database<u32>, KeyStore<u32>, crate::synth::Corpus) {
        let engine = NttEngine::new(GfParams::reference());
        let corpus = generate_corpus(&CorpusSpec { subjects: n, seed: 11, ..CorpusSpec::default() }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut db = Database::new(*engine.params(), k, scenario);
        let mut keys = KeyStore::new(engine.params(), k, scenario, &mut rng);
        for s in 0..n {
            let l = zero_pad(corpus.get(s, 0, 0), ShiftWindow::EXACT);
            let r = zero_pad(corpus.get(s, 1, 0), ShiftWindow::EXACT);
            enroll(&engine, &mut db, &mut keys, s as u64, [&l, &r], &mut rng).unwrap();
        }
        (engine, db, keys, corpus)
    }

    #[test]
    fn first_record_is_anchor_and_pixel_total_matches() {
        let (_, db, keys, _) = setup(4, Scenario::Individual, 2);
        assert!(db.records()[0].anchor);
        assert_eq!(db.records().iter().filter(|r| r.anchor).count(), 1);
        assert_eq!(keys.anchor_record(), Some(0));
        // per finger: (h + w)(kN + 1)
        assert_eq!(db.index_pixels(), FINGERS * 96 * (2 * 4 + 1));
    }

    #[test]
    fn common_scenario_shares_filters() {
        let (_, _, keys, _) = setup(2, Scenario::Common, 2);
        assert_eq!(keys.entries().len(), 1);
        assert!(std::ptr::eq(keys.for_record(0), keys.for_record(1)));
    }

    #[test]
    fn self_query_accepted_first() {
        for scenario in [Scenario::Individual, Scenario::Common] {
            let (engine, db, keys, corpus) = setup(1, scenario, 2);
            let q = protect_query(&engine, &keys, [corpus.get(0, 0, 0), corpus.get(0, 1, 0)], 3).unwrap();
            let res = identify(&engine, &db, &q, 10_000, Windows::default()).unwrap();
            assert_eq!(res.decision, Decision::Accepted(0));
            assert_eq!(res.exact_computations, 1);
            assert_eq!(res.fused_exact_score, Some(0));
        }
    }

    #[test]
    fn zero_threshold_rejects_after_all() {
        let (engine, db, keys, corpus) = setup(6, Scenario::Individual, 2);
        let q = protect_query(&engine, &keys, [corpus.get(0, 0, 1), corpus.get(0, 1, 1)], 3).unwrap();
        let res = identify(&engine, &db, &q, 0, Windows::default()).unwrap();
        assert_eq!(res.decision, Decision::Rejected);
        assert_eq!(res.exact_computations, 6);
    }

    #[test]
    fn counter_matches_accounting() {
        let (engine, db, keys, corpus) = setup(5, Scenario::Individual, 2);
        let q = protect_query(&engine, &keys, [corpus.get(2, 0, 1), corpus.get(2, 1, 1)], 3).unwrap();
        let before = engine.counter().get();
        let res = identify(&engine, &db, &q, 400, Windows::default()).unwrap();
        let used = engine.counter().get() - before;
        let (n, k, hw) = (5u64, 2u64, 96u64);
        assert_eq!(used, 2 * k * k * 2 * n + 2 * hw * 2 * res.exact_computations as u64);
    }

    #[test]
    fn scenario_mismatch_is_reported() {
        let (engine, db, _, corpus) = setup(2, Scenario::Individual, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let other = KeyStore::new(engine.params(), 2, Scenario::Common, &mut rng);
        let q = protect_query(&engine, &other, [corpus.get(0, 0, 1), corpus.get(0, 1, 1)], 3).unwrap();
        assert!(matches!(identify(&engine, &db, &q, 100, Windows::default()), Err(Error::ScenarioMismatch { .. })));
    }

    #[test]
    fn manifest_holds_no_plaintext() {
        assert!(EnrollRecord::<u32>::MANIFEST
            .iter()
            .all(|(_, kind)| !matches!(kind, DataKind::PlaintextImage | DataKind::PlaintextIndex)));
    }
}
