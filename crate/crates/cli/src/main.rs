//! `cirf`: corpus generation, enrollment, identification, benchmarks and
//! self-checks for cancelable template matching with low-rank indexing.
//!
//! Every CSV row starts with the schema version, a hash of the resolved
//! configuration and the seed. Failures are reported on stderr as one JSON
//! object and the process exits nonzero (1 for failed checks, 2 for errors).

use std::fs;
use std::hint::black_box;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use cirf_core::cirf::{BioImage, ShiftWindow};
use cirf_core::gf::{GfParams, REFERENCE};
use cirf_core::identify::{
    anchor_bridges, approx_finger_score, eer, enroll, exact_finger_score, exhaustive_scores,
    hit_rate, load_database, load_keys, protect_query, rank_candidates, save_database, save_keys, verify_in_order,
    Database, Decision, KeyStore, ProtectedQuery, Scenario, Timing,
};
use cirf_core::suites::{secrecy_suites, verify_suites, SecrecyConfig};
use cirf_core::synth::{generate_corpus, load_dataset, save_dataset, zero_pad, Corpus, CorpusSpec};
use cirf_core::{Engine, Error};

/// Version of every CSV layout written by this tool.
const CSV_SCHEMA: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "cirf", version, about = "Cancelable biometric identification with correlation-invariant random filtering")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Worker threads; 0 uses one per core. Results other than timings do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for default input and output files.
    #[arg(long, global = true, env = "CIRF_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    /// Image height.
    #[arg(long, global = true, default_value_t = REFERENCE.3)]
    height: usize,
    /// Image width.
    #[arg(long, global = true, default_value_t = REFERENCE.4)]
    width: usize,
    /// Prime modulus [default: 8641 at 32x64, otherwise derived from the geometry].
    #[arg(long, global = true)]
    p: Option<u64>,
    /// Root of unity of order `height` [default: 40 at 32x64, otherwise derived].
    #[arg(long, global = true)]
    alpha: Option<u64>,
    /// Root of unity of order `width` [default: 948 at 32x64, otherwise derived].
    #[arg(long, global = true)]
    beta: Option<u64>,
    /// Rank of the binary factorisation used for indexing.
    #[arg(long, global = true, default_value_t = 2)]
    k: usize,
    /// Filter scenario.
    #[arg(long, global = true, value_enum, default_value_t = ScenarioArg::Individual)]
    scenario: ScenarioArg,
    /// Exact matching window as `di_max,dj_max`.
    #[arg(long, global = true, default_value = "6,12", value_parser = parse_window)]
    exact_window: ShiftWindow,
    /// Approximate matching window as `di_max,dj_max`.
    #[arg(long, global = true, default_value = "2,4", value_parser = parse_window)]
    approx_window: ShiftWindow,
    /// Accept when the fused exact distance is below this value.
    #[arg(long, global = true, default_value_t = 80)]
    threshold: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ScenarioArg {
    Individual,
    Common,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::Individual => Scenario::Individual,
            ScenarioArg::Common => Scenario::Common,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct CorpusArgs {
    /// Subjects to generate.
    #[arg(long, default_value_t = 100)]
    subjects: usize,
    /// Probability of flipping each pixel of the second sample.
    #[arg(long, default_value_t = 0.03)]
    noise: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic two-finger corpus.
    GenData {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Output file [default: <out-dir>/dataset.bin].
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Enroll the first sample of every subject.
    Enroll {
        /// Dataset file [default: <out-dir>/dataset.bin].
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Database file to write [default: <out-dir>/database.bin].
        #[arg(long)]
        db: Option<PathBuf>,
        /// Client key file to write [default: <out-dir>/keys.bin].
        #[arg(long)]
        keys: Option<PathBuf>,
    },
    /// Identify the second sample of each subject; one CSV row per query.
    Identify {
        /// Dataset file [default: <out-dir>/dataset.bin].
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Database file [default: <out-dir>/database.bin].
        #[arg(long)]
        db: Option<PathBuf>,
        /// Client key file [default: <out-dir>/keys.bin].
        #[arg(long)]
        keys: Option<PathBuf>,
        /// Number of subjects to query, from the first; all when omitted.
        #[arg(long)]
        queries: Option<usize>,
        /// CSV output [default: <out-dir>/identify.csv].
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate, enroll and identify in memory, then time both scores.
    Bench {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Score computations timed for each score kind, after warmup.
        #[arg(long, default_value_t = 1000)]
        timing_scores: usize,
        /// CSV output [default: <out-dir>/bench.csv].
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run every oracle-equality suite; with --db, also check a database file.
    Verify {
        /// Random instances per suite.
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Database file whose checksums are verified.
        #[arg(long)]
        db: Option<PathBuf>,
    },
    /// Parameter uniqueness, uniformity, unlinkability and the equation audit.
    SecrecyTest {
        /// Random (plaintext, transformed) pairs for the uniqueness checks.
        #[arg(long, default_value_t = 1000)]
        bijection_trials: usize,
        /// Samples per tested pixel for the uniformity test.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Pixel positions tested per vector class.
        #[arg(long, default_value_t = 4)]
        positions: usize,
        /// Independent transform pairs for the unlinkability test.
        #[arg(long, default_value_t = 20)]
        unlink_trials: usize,
        /// Significance level of the statistical tests.
        #[arg(long, default_value_t = 0.001)]
        significance: f64,
        /// Uniformity CSV [default: <out-dir>/secrecy.csv].
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenData { .. } => "gen-data",
            Command::Enroll { .. } => "enroll",
            Command::Identify { .. } => "identify",
            Command::Bench { .. } => "bench",
            Command::Verify { .. } => "verify",
            Command::SecrecyTest { .. } => "secrecy-test",
        }
    }
}

fn parse_window(s: &str) -> Result<ShiftWindow, String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `di_max,dj_max`, got `{s}`"))?;
    let a = a.trim().parse().map_err(|e| format!("di_max: {e}"))?;
    let b = b.trim().parse().map_err(|e| format!("dj_max: {e}"))?;
    Ok(ShiftWindow::new(a, b))
}

/// The resolved configuration; its hash tags every CSV row.
#[derive(Serialize)]
struct RunConfig<'a> {
    command: &'a str,
    p: u64,
    alpha: u64,
    beta: u64,
    height: usize,
    width: usize,
    k: usize,
    scenario: ScenarioArg,
    exact_window: (usize, usize),
    approx_window: (usize, usize),
    threshold: u64,
    corpus: Option<CorpusArgs>,
    seed: u64,
}

struct Ctx {
    engine: Engine,
    global: GlobalArgs,
    config_hash: String,
}

impl Ctx {
    fn path(&self, given: &Option<PathBuf>, default: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.global.out_dir.join(default))
    }

    fn scenario(&self) -> Scenario {
        self.global.scenario.into()
    }

    fn windows(&self) -> (ShiftWindow, ShiftWindow) {
        (self.global.exact_window, self.global.approx_window)
    }
}

fn resolve_params(g: &GlobalArgs) -> anyhow::Result<GfParams<u32>> {
    let (h, w) = (g.height, g.width);
    let params = match (g.p, g.alpha, g.beta) {
        (None, None, None) if (h, w) == (REFERENCE.3, REFERENCE.4) => GfParams::reference(),
        (None, None, None) => GfParams::find(h, w, (h * w) as u64)?,
        (Some(p), Some(a), Some(b)) => GfParams::validate(p, a, b, h, w)?,
        _ => bail!(FieldError { field: "p", message: "--p, --alpha and --beta must be given together".into() }),
    };
    if params.p() as u64 <= (h * w) as u64 {
        bail!(FieldError {
            field: "p",
            message: format!("p = {} must exceed the largest distance sum h*w = {}", params.p(), h * w)
        });
    }
    Ok(params)
}

/// A failure attributed to one configuration field.
#[derive(Debug)]
struct FieldError {
    field: &'static str,
    message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for FieldError {}

fn field_of(err: &anyhow::Error) -> Option<&'static str> {
    if let Some(f) = err.downcast_ref::<FieldError>() {
        return Some(f.field);
    }
    Some(match err.chain().find_map(|e| e.downcast_ref::<Error>())? {
        Error::NotPrime(_) | Error::ModulusTooWide { .. } | Error::ModulusTooSmall { .. } => "p",
        Error::OrderMismatch { which, .. } => which,
        Error::DivisibilityViolation { .. } => "height/width",
        Error::RankTooLarge { .. } => "k",
        Error::WindowTooLarge { .. } => "window",
        Error::ScenarioMismatch { .. } => "scenario",
        Error::CorruptHeader(_) | Error::CorruptRecord { .. } | Error::FormatVersionMismatch { .. } => "file",
        _ => return None,
    })
}

#[derive(Serialize)]
struct Failure {
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<&'static str>,
    detail: String,
}

#[derive(Serialize)]
struct FailureReport<'a> {
    command: &'a str,
    status: &'a str,
    failures: Vec<Failure>,
}

/// Named check outcome printed by `verify` and `secrecy-test`.
struct Line {
    name: String,
    passed: bool,
    detail: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = cli.command.name();
    match run(cli) {
        Ok(lines) => {
            let failures: Vec<Failure> = lines
                .into_iter()
                .filter(|l| !l.passed)
                .map(|l| Failure { name: l.name, field: None, detail: l.detail })
                .collect();
            if failures.is_empty() {
                return ExitCode::SUCCESS;
            }
            report(command, "failed", failures);
            ExitCode::from(1)
        }
        Err(err) => {
            let failure = Failure { name: "error".into(), field: field_of(&err), detail: format!("{err:#}") };
            report(command, "error", vec![failure]);
            ExitCode::from(2)
        }
    }
}

fn report(command: &str, status: &str, failures: Vec<Failure>) {
    let r = FailureReport { command, status, failures };
    eprintln!("{}", serde_json::to_string(&r).expect("serialisable"));
}

fn run(cli: Cli) -> anyhow::Result<Vec<Line>> {
    let Cli { global, command } = cli;
    if global.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(global.threads).build_global()?;
    }
    if global.k == 0 {
        bail!(FieldError { field: "k", message: "rank must be at least 1".into() });
    }
    let params = resolve_params(&global)?;
    for (field, win) in [("exact-window", global.exact_window), ("approx-window", global.approx_window)] {
        win.check(global.height, global.width)
            .map_err(|e| FieldError { field, message: e.to_string() })?;
    }
    let corpus = match &command {
        Command::GenData { corpus, .. } | Command::Bench { corpus, .. } => Some(corpus.clone()),
        _ => None,
    };
    let config = RunConfig {
        command: command.name(),
        p: params.p() as u64,
        alpha: params.alpha() as u64,
        beta: params.beta() as u64,
        height: global.height,
        width: global.width,
        k: global.k,
        scenario: global.scenario,
        exact_window: (global.exact_window.di_max, global.exact_window.dj_max),
        approx_window: (global.approx_window.di_max, global.approx_window.dj_max),
        threshold: global.threshold,
        corpus,
        seed: global.seed,
    };
    let digest = Sha256::digest(serde_json::to_vec(&config)?);
    let config_hash = hex::encode(&digest[..8]);
    let ctx = Ctx { engine: Engine::new(params), global, config_hash };
    fs::create_dir_all(&ctx.global.out_dir)
        .with_context(|| format!("creating output directory {}", ctx.global.out_dir.display()))?;

    match &command {
        Command::GenData { corpus, output } => gen_data(&ctx, corpus, &ctx.path(output, "dataset.bin")),
        Command::Enroll { dataset, db, keys } => enroll_cmd(
            &ctx,
            &ctx.path(dataset, "dataset.bin"),
            &ctx.path(db, "database.bin"),
            &ctx.path(keys, "keys.bin"),
        ),
        Command::Identify { dataset, db, keys, queries, output } => identify_cmd(
            &ctx,
            &ctx.path(dataset, "dataset.bin"),
            &ctx.path(db, "database.bin"),
            &ctx.path(keys, "keys.bin"),
            *queries,
            &ctx.path(output, "identify.csv"),
        ),
        Command::Bench { corpus, timing_scores, output } => {
            bench(&ctx, corpus, *timing_scores, &ctx.path(output, "bench.csv"))
        }
        Command::Verify { trials, db } => verify(&ctx, *trials, db.as_deref()),
        Command::SecrecyTest { bijection_trials, samples, positions, unlink_trials, significance, output } => {
            let cfg = SecrecyConfig {
                seed: ctx.global.seed,
                k: ctx.global.k,
                bijection_trials: *bijection_trials,
                samples: *samples,
                positions: *positions,
                unlink_trials: *unlink_trials,
                significance: *significance,
            };
            secrecy(&ctx, &cfg, &ctx.path(output, "secrecy.csv"))
        }
    }
}

fn corpus_spec(ctx: &Ctx, args: &CorpusArgs) -> CorpusSpec {
    CorpusSpec {
        subjects: args.subjects,
        h: ctx.global.height,
        w: ctx.global.width,
        pixel_flip_noise: args.noise,
        seed: ctx.global.seed,
        ..CorpusSpec::default()
    }
}

fn gen_data(ctx: &Ctx, args: &CorpusArgs, output: &Path) -> anyhow::Result<Vec<Line>> {
    let corpus = generate_corpus(&corpus_spec(ctx, args))?;
    save_dataset(&corpus, output).with_context(|| format!("writing {}", output.display()))?;
    println!("wrote {} images of {} subjects to {}", corpus.images().len(), corpus.subjects(), output.display());
    Ok(Vec::new())
}

fn check_corpus(ctx: &Ctx, corpus: &Corpus) -> anyhow::Result<()> {
    let spec = corpus.spec();
    if (spec.h, spec.w) != ctx.engine.shape() {
        bail!(FieldError {
            field: "height/width",
            message: format!("dataset images are {}x{}, configured {:?}", spec.h, spec.w, ctx.engine.shape()),
        });
    }
    if spec.fingers_per_subject < 2 || spec.samples_per_finger < 2 {
        bail!(FieldError { field: "dataset", message: "need two fingers and two samples per subject".into() });
    }
    Ok(())
}

fn build_database(ctx: &Ctx, corpus: &Corpus) -> anyhow::Result<(Database<u32>, KeyStore<u32>)> {
    let engine = &ctx.engine;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.global.seed);
    let mut db = Database::new(*engine.params(), ctx.global.k, ctx.scenario());
    let mut keys = KeyStore::new(engine.params(), ctx.global.k, ctx.scenario(), &mut rng);
    let exact = ctx.global.exact_window;
    for s in 0..corpus.subjects() {
        let l = zero_pad(corpus.get(s, 0, 0), exact);
        let r = zero_pad(corpus.get(s, 1, 0), exact);
        enroll(engine, &mut db, &mut keys, s as u64, [&l, &r], &mut rng)
            .with_context(|| format!("enrolling subject {s}"))?;
    }
    Ok((db, keys))
}

fn enroll_cmd(ctx: &Ctx, dataset: &Path, db_path: &Path, keys_path: &Path) -> anyhow::Result<Vec<Line>> {
    let corpus = load_dataset(dataset).with_context(|| format!("reading {}", dataset.display()))?;
    check_corpus(ctx, &corpus)?;
    let (db, keys) = build_database(ctx, &corpus)?;
    save_database(&db, db_path).with_context(|| format!("writing {}", db_path.display()))?;
    save_keys(&keys, ctx.engine.params(), keys_path).with_context(|| format!("writing {}", keys_path.display()))?;
    println!(
        "enrolled {} records ({} scenario, anchor at {:?}) into {}",
        db.len(),
        db.scenario().name(),
        db.anchor_position(),
        db_path.display()
    );
    Ok(Vec::new())
}

#[derive(Serialize)]
struct IdentifyRow {
    schema: u32,
    config_hash: String,
    seed: u64,
    query_subject: usize,
    decision: &'static str,
    accepted_id: Option<u64>,
    fused_exact_distance: Option<u64>,
    n_prime: usize,
    genuine_rank: Option<usize>,
    rank_us: f64,
    verify_us: f64,
}

/// One query end to end: protect, rank, verify.
struct QueryOutcome {
    query: ProtectedQuery<u32>,
    decision: Decision,
    fused: Option<u64>,
    n_prime: usize,
    rank: Option<usize>,
    rank_us: f64,
    verify_us: f64,
}

fn run_query(ctx: &Ctx, db: &Database<u32>, keys: &KeyStore<u32>, corpus: &Corpus, s: usize) -> anyhow::Result<QueryOutcome> {
    let (exact, approx) = ctx.windows();
    let images: [&BioImage; 2] = [corpus.get(s, 0, 1), corpus.get(s, 1, 1)];
    let query = protect_query(&ctx.engine, keys, images, ctx.global.seed.wrapping_add(2 * s as u64))?;
    let t0 = Instant::now();
    let ranking = rank_candidates(&ctx.engine, db, &query, approx)?;
    let rank_us = t0.elapsed().as_secs_f64() * 1e6;
    let t0 = Instant::now();
    let res = verify_in_order(&ctx.engine, db, &query, &ranking, ctx.global.threshold, exact)?;
    let verify_us = t0.elapsed().as_secs_f64() * 1e6;
    let rank = db.records().iter().position(|r| r.id == s as u64).and_then(|n| ranking.rank_of(n));
    Ok(QueryOutcome {
        query,
        decision: res.decision,
        fused: res.fused_exact_score,
        n_prime: res.exact_computations,
        rank,
        rank_us,
        verify_us,
    })
}

fn identify_cmd(
    ctx: &Ctx,
    dataset: &Path,
    db_path: &Path,
    keys_path: &Path,
    queries: Option<usize>,
    output: &Path,
) -> anyhow::Result<Vec<Line>> {
    let corpus = load_dataset(dataset).with_context(|| format!("reading {}", dataset.display()))?;
    check_corpus(ctx, &corpus)?;
    let db = load_database::<u32>(db_path).with_context(|| format!("reading {}", db_path.display()))?;
    if db.params() != ctx.engine.params() {
        bail!(FieldError { field: "p", message: "database was built with different transform parameters".into() });
    }
    let keys = load_keys(ctx.engine.params(), keys_path).with_context(|| format!("reading {}", keys_path.display()))?;
    let n = queries.unwrap_or(corpus.subjects()).min(corpus.subjects());
    let mut out = csv::Writer::from_path(output).with_context(|| format!("writing {}", output.display()))?;
    let mut accepted = 0;
    for s in 0..n {
        let q = run_query(ctx, &db, &keys, &corpus, s)?;
        accepted += usize::from(q.decision.is_accepted());
        let (decision, accepted_id) = match q.decision {
            Decision::Accepted(id) => ("accepted", Some(id)),
            Decision::Rejected => ("rejected", None),
        };
        out.serialize(IdentifyRow {
            schema: CSV_SCHEMA,
            config_hash: ctx.config_hash.clone(),
            seed: ctx.global.seed,
            query_subject: s,
            decision,
            accepted_id,
            fused_exact_distance: q.fused,
            n_prime: q.n_prime,
            genuine_rank: q.rank,
            rank_us: q.rank_us,
            verify_us: q.verify_us,
        })?;
    }
    out.flush()?;
    println!("{accepted}/{n} queries accepted; rows in {}", output.display());
    Ok(Vec::new())
}

#[derive(Serialize)]
struct BenchRow<'a> {
    schema: u32,
    config_hash: &'a str,
    seed: u64,
    metric: String,
    /// `timing` rows vary between runs; all others are reproducible.
    kind: &'static str,
    value: f64,
}

fn bench(ctx: &Ctx, args: &CorpusArgs, timing_scores: usize, output: &Path) -> anyhow::Result<Vec<Line>> {
    let engine = &ctx.engine;
    let (exact, approx) = ctx.windows();
    let corpus = generate_corpus(&corpus_spec(ctx, args))?;
    let (db, keys) = build_database(ctx, &corpus)?;
    let n = db.len();

    let counter = engine.counter();
    counter.reset();
    let (mut results, mut ranks, mut genuine, mut impostor) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut n_primes = Vec::new();
    let mut queries = Vec::new();
    for s in 0..n {
        let q = run_query(ctx, &db, &keys, &corpus, s)?;
        if let Some(r) = q.rank {
            ranks.push(r);
        }
        if q.decision.is_accepted() {
            n_primes.push(q.n_prime);
        }
        results.push(q.decision);
        queries.push(q.query);
    }
    let ident_intt = counter.get();
    for (s, q) in queries.iter().enumerate() {
        let scores = exhaustive_scores(engine, &db, q, exact)?;
        genuine.push(scores[s]);
        if let Some(best) = (0..n).filter(|&m| m != s).map(|m| scores[m]).min() {
            impostor.push(best);
        }
    }

    // Score timing over rotating records, warmup excluded.
    let q = &queries[0];
    let bridges = anchor_bridges(engine, &db, q)?;
    let warmup = 50;
    let (mut t_exact, mut t_approx) = (Vec::new(), Vec::new());
    for i in 0..warmup + timing_scores {
        let m = i % n;
        let (rec, fq) = (&db.records()[m].fingers[0], &q.for_record(m)[0]);
        let t0 = Instant::now();
        black_box(approx_finger_score(engine, &bridges[0], rec, fq, approx)?);
        let ta = t0.elapsed().as_secs_f64() * 1e6;
        let t0 = Instant::now();
        black_box(exact_finger_score(engine, rec, fq, exact)?);
        let te = t0.elapsed().as_secs_f64() * 1e6;
        if i >= warmup {
            t_approx.push(ta);
            t_exact.push(te);
        }
    }
    let (te, ta) = (Timing::from_samples(&t_exact), Timing::from_samples(&t_approx));

    let mut rows: Vec<(String, &'static str, f64)> = vec![
        ("records".into(), "count", n as f64),
        ("queries".into(), "count", queries.len() as f64),
        ("accepted".into(), "count", results.iter().filter(|d| d.is_accepted()).count() as f64),
        ("exact_score_mean_us".into(), "timing", te.mean_us),
        ("exact_score_median_us".into(), "timing", te.median_us),
        ("approx_score_mean_us".into(), "timing", ta.mean_us),
        ("approx_score_median_us".into(), "timing", ta.median_us),
        ("exact_over_approx_ratio".into(), "timing", te.mean_us / ta.mean_us),
        ("timed_scores".into(), "count", timing_scores as f64),
        ("intt1d_total_identification".into(), "count", ident_intt as f64),
        ("intt1d_per_exact_score".into(), "count", (2 * (ctx.global.height + ctx.global.width)) as f64),
        ("intt1d_per_approx_score".into(), "count", (2 * ctx.global.k * ctx.global.k) as f64),
    ];
    if !n_primes.is_empty() {
        rows.push(("mean_n_prime".into(), "rate", n_primes.iter().sum::<usize>() as f64 / n_primes.len() as f64));
    }
    for np in [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000].into_iter().filter(|&v| v <= n) {
        rows.push((format!("hit_rate@{np}"), "rate", hit_rate(&ranks, np)));
    }
    if !impostor.is_empty() {
        rows.push(("eer".into(), "rate", eer(&genuine, &impostor)?));
    }

    let mut out = csv::Writer::from_path(output).with_context(|| format!("writing {}", output.display()))?;
    for (metric, kind, value) in rows {
        println!("{metric:<32} {value:.6}");
        out.serialize(BenchRow { schema: CSV_SCHEMA, config_hash: &ctx.config_hash, seed: ctx.global.seed, metric, kind, value })?;
    }
    out.flush()?;
    Ok(Vec::new())
}

fn print_lines(lines: &[Line]) {
    for l in lines {
        println!("{} {}: {}", if l.passed { "PASS" } else { "FAIL" }, l.name, l.detail);
    }
}

fn verify(ctx: &Ctx, trials: usize, db: Option<&Path>) -> anyhow::Result<Vec<Line>> {
    if let Some(path) = db {
        let db = load_database::<u32>(path).with_context(|| format!("verifying {}", path.display()))?;
        println!("PASS database: {} records, checksums intact", db.len());
    }
    let checks = verify_suites(&ctx.engine, ctx.global.k, ctx.global.seed, trials)?;
    let lines: Vec<Line> = checks.into_iter().map(|c| Line { name: c.name, passed: c.passed, detail: c.detail }).collect();
    print_lines(&lines);
    Ok(lines)
}

#[derive(Serialize)]
struct UniformityRow<'a> {
    schema: u32,
    config_hash: &'a str,
    seed: u64,
    class: &'a str,
    position: usize,
    chi_square: f64,
    p_value: f64,
    zeros: usize,
}

fn secrecy(ctx: &Ctx, cfg: &SecrecyConfig, output: &Path) -> anyhow::Result<Vec<Line>> {
    if !(0.0..1.0).contains(&cfg.significance) || cfg.significance == 0.0 {
        return Err(anyhow!(FieldError { field: "significance", message: "must lie in (0, 1)".into() }));
    }
    let report = secrecy_suites(&ctx.engine, cfg)?;
    let mut out = csv::Writer::from_path(output).with_context(|| format!("writing {}", output.display()))?;
    for u in &report.uniformity {
        out.serialize(UniformityRow {
            schema: CSV_SCHEMA,
            config_hash: &ctx.config_hash,
            seed: ctx.global.seed,
            class: &u.class,
            position: u.position,
            chi_square: u.statistic,
            p_value: u.p_value,
            zeros: u.zeros,
        })?;
    }
    out.flush()?;
    println!("{:<11} {:>5} {:>16} {:>16} {:>16} {:>16}", "scenario", "N", "template unk.", "template eq.", "index unk.", "index eq.");
    for r in &report.audit {
        println!(
            "{:<11} {:>5} {:>16} {:>16} {:>16} {:>16}",
            r.scenario.name(),
            r.n,
            r.template_unknowns.to_string(),
            r.template_equations.to_string(),
            r.index_unknowns.to_string(),
            r.index_equations.to_string()
        );
    }
    let lines: Vec<Line> =
        report.checks.into_iter().map(|c| Line { name: c.name, passed: c.passed, detail: c.detail }).collect();
    print_lines(&lines);
    Ok(lines)
}
