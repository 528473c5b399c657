use std::sync::OnceLock;

use cirf_core::cirf::ShiftWindow;
use cirf_core::gf::{GfParams, NttEngine};
use cirf_core::identify::{
    enroll, exhaustive_decision, exhaustive_scores, identify, protect_query, rank_candidates, Database, Decision,
    KeyStore, ProtectedQuery, Scenario, Windows,
};
use cirf_core::synth::{generate_corpus, zero_pad, Corpus, CorpusSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SUBJECTS: usize = 24;

struct Fixture {
    engine: NttEngine<u32>,
    db: Database<u32>,
    queries: Vec<ProtectedQuery<u32>>,
    scores: Vec<Vec<u64>>,
}

fn build(k: usize, scenario: Scenario) -> Fixture {
    let engine = NttEngine::new(GfParams::reference());
    let corpus: Corpus = generate_corpus(&CorpusSpec { subjects: SUBJECTS, seed: 5, ..CorpusSpec::default() }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut db = Database::new(*engine.params(), k, scenario);
    let mut keys = KeyStore::new(engine.params(), k, scenario, &mut rng);
    for s in 0..SUBJECTS {
        let fingers = [0, 1].map(|f| zero_pad(corpus.get(s, f, 0), ShiftWindow::EXACT));
        enroll(&engine, &mut db, &mut keys, s as u64, [&fingers[0], &fingers[1]], &mut rng).unwrap();
    }
    let queries: Vec<_> = (0..SUBJECTS)
        .map(|s| protect_query(&engine, &keys, [corpus.get(s, 0, 1), corpus.get(s, 1, 1)], 100 + s as u64).unwrap())
        .collect();
    let scores = queries.iter().map(|q| exhaustive_scores(&engine, &db, q, ShiftWindow::EXACT).unwrap()).collect();
    Fixture { engine, db, queries, scores }
}

fn individual() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| build(2, Scenario::Individual))
}

fn common_rank_one() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| build(1, Scenario::Common))
}

fn check(fx: &Fixture, q: usize, threshold: u64) -> Result<(), TestCaseError> {
    let (e, db) = (&fx.engine, &fx.db);
    let scores = &fx.scores[q];
    let k = db.k() as u64;
    e.counter().reset();
    let res = identify(e, db, &fx.queries[q], threshold, Windows::default()).unwrap();
    let (h, w) = e.shape();
    let n = db.len() as u64;
    let expect = n * 2 * 2 * k * k + res.exact_computations as u64 * 2 * 2 * (h + w) as u64;
    prop_assert_eq!(e.counter().get(), expect);

    let ranking = rank_candidates(e, db, &fx.queries[q], ShiftWindow::APPROX).unwrap();
    prop_assert_eq!(&res.visited_order, &ranking.order);
    prop_assert!(ranking.order.windows(2).all(|p| ranking.scores[p[0]] >= ranking.scores[p[1]]));

    let baseline = exhaustive_decision(db, scores, threshold);
    prop_assert_eq!(res.decision.is_accepted(), baseline.decision.is_accepted());
    match res.accepted_position {
        Some(pos) => {
            let walked = ranking.rank_of(pos).unwrap();
            prop_assert_eq!(res.exact_computations, walked + 1);
            prop_assert!(ranking.order[..walked].iter().all(|&m| scores[m] >= threshold));
            prop_assert_eq!(res.fused_exact_score, Some(scores[pos]));
            prop_assert!(baseline.below_threshold.contains(&pos));
            if baseline.below_threshold.len() == 1 {
                prop_assert_eq!(res.decision, baseline.decision);
            }
            prop_assert_eq!(res.decision, Decision::Accepted(db.records()[pos].id));
        }
        None => {
            prop_assert_eq!(res.exact_computations, db.len());
            prop_assert!(baseline.below_threshold.is_empty());
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn individual_matches_exhaustive(q in 0..SUBJECTS, threshold in 0u64..400) {
        check(individual(), q, threshold)?;
    }

    #[test]
    fn common_rank_one_matches_exhaustive(q in 0..SUBJECTS, threshold in 0u64..400) {
        check(common_rank_one(), q, threshold)?;
    }
}

#[test]
fn genuine_queries_accepted_at_moderate_threshold() {
    let fx = individual();
    let accepted = (0..SUBJECTS)
        .filter(|&q| {
            identify(&fx.engine, &fx.db, &fx.queries[q], 80, Windows::default()).unwrap().decision
                == Decision::Accepted(q as u64)
        })
        .count();
    assert!(accepted * 10 >= SUBJECTS * 9, "{accepted}/{SUBJECTS}");
}
