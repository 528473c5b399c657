use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),

    #[error("{which} has multiplicative order {found}, expected {expected}")]
    OrderMismatch {
        which: &'static str,
        expected: u64,
        found: u64,
    },

    #[error("transform length {size} does not divide p - 1 = {}", .p - 1)]
    DivisibilityViolation { size: u64, p: u64 },

    #[error("modulus {p} does not fit a {bits}-bit storage word")]
    ModulusTooWide { p: u64, bits: u32 },

    #[error("modulus {p} must exceed the maximum correlation value {bound}")]
    ModulusTooSmall { p: u64, bound: u64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("vector length {found} does not match transform length {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("matrix shape {found:?} does not match {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("element {index} is zero and has no inverse")]
    ZeroElement { index: usize },

    #[error("filter entry {index} is zero")]
    ZeroFilterEntry { index: usize },

    #[error("shift window ({di_max}, {dj_max}) does not fit a {h}x{w} image")]
    WindowTooLarge {
        di_max: usize,
        dj_max: usize,
        h: usize,
        w: usize,
    },

    #[error("rank {k} exceeds min(h, w) = {max}")]
    RankTooLarge { k: usize, max: usize },

    #[error("image is not binary: pixel {index} has value {value}")]
    NotBinary { index: usize, value: u16 },

    #[error("pixel {index} has value {value}, not below p = {p}")]
    PixelOutOfRange { index: usize, value: u64, p: u64 },

    #[error("no dithered variant of {side} column {column} has a zero-free spectrum")]
    DitherExhausted { side: &'static str, column: usize },

    #[error("query scenario {query} does not match database scenario {database}")]
    ScenarioMismatch {
        query: &'static str,
        database: &'static str,
    },

    #[error("score set is empty")]
    EmptyScores,

    #[error("database has no enrolled records")]
    EmptyDatabase,

    #[error("format version {found} is not supported (expected {expected})")]
    FormatVersionMismatch { found: u16, expected: u16 },

    #[error("corrupt header: {0}")]
    CorruptHeader(String),

    #[error("corrupt record {record} at byte offset {offset}: {reason}")]
    CorruptRecord {
        record: usize,
        offset: u64,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
