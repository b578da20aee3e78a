//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // mask geometry
    #[error("mask has no set pixels")]
    EmptyMask,
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("point ({0}, {1}) outside image {2}x{3}")]
    OutOfBounds(f64, f64, u32, u32),
    #[error("direction undefined for coincident points")]
    CoincidentPoints,
    #[error("invalid mask payload: {0}")]
    InvalidMask(String),

    // tamper engine
    #[error("instance {0} is not eligible: {1}")]
    IneligibleInstance(String, String),
    #[error("unknown blur kind: {0}")]
    UnknownBlurKind(String),

    // qa synthesis
    #[error("record {0} is invalid: {1}")]
    InvalidRecord(String, String),
    #[error("no derivable answer for qid {qid} on record {record}")]
    TemplateGap { qid: u8, record: String },
    #[error("slot {slot} of qid {qid} cannot be filled")]
    MissingSlot { qid: u8, slot: String },
    #[error("registry error: {0}")]
    Registry(String),

    // curation
    #[error("empty input")]
    EmptyInput,
    #[error("qid {0} missing from input triples")]
    MissingQid(u8),
    #[error("invalid configuration: {0}")]
    Config(String),

    // dataset io
    #[error("missing file: {0}")]
    MissingFile(String),
    #[error("bad dimensions for {path}: got {got_w}x{got_h}, want {want_w}x{want_h}")]
    BadDimensions {
        path: String,
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },
    #[error("non-binary mask {path}: pixel value {value}")]
    NonBinaryMask { path: String, value: u8 },
    #[error("io failure on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at {path}:{line}: {detail}")]
    ParseError {
        path: String,
        line: usize,
        detail: String,
    },
    #[error("checksum mismatch for {path}: recorded {recorded}, actual {actual}")]
    ChecksumMismatch {
        path: String,
        recorded: String,
        actual: String,
    },

    // evaluation
    #[error("duplicate triple id: {0}")]
    DuplicateTripleId(String),
    #[error("prediction references unknown triple id: {0}")]
    UnknownTripleId(String),
    #[error("gold triple set is empty")]
    EmptyGold,
    #[error("unknown qid: {0}")]
    UnknownQid(u8),
    #[error("reports were scored against different gold sets")]
    BasisMismatch,
    #[error("missing triple: {0}")]
    MissingTriple(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::IoFailure {
            path: path.into(),
            source,
        }
    }
}
