use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),

    #[error("audio buffer is empty")]
    EmptyAudio,

    #[error("invalid audio: {0}")]
    InvalidAudio(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate utterance id `{0}`")]
    DuplicateId(String),

    #[error("bad magic: expected \"RFB1\"")]
    BadMagic,

    #[error("unsupported feature file version {0}")]
    VersionMismatch(u32),

    #[error("truncated or malformed feature file: {0}")]
    MalformedFeatures(String),

    #[error("signal of {len} samples is shorter than one frame of {win}")]
    TooShort { len: usize, win: usize },

    #[error("frame {index} has {len} samples, expected {expected}")]
    InconsistentFrameLength {
        index: usize,
        len: usize,
        expected: usize,
    },

    #[error("autocorrelation lag {max_lag} must be smaller than frame length {len}")]
    LagTooLarge { max_lag: usize, len: usize },

    #[error("unstable LPC frame: reflection coefficient {k} at stage {stage}")]
    UnstableFrame { stage: usize, k: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("mel filterbank has colliding centers: filter {0} shares a DFT bin with its neighbour")]
    TooManyMels(usize),

    #[error("segment plan does not tile {n_frames} frames: {reason}")]
    PlanMismatch { n_frames: usize, reason: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("EER needs at least one bonafide and one spoof trial (got {bonafide} bonafide, {spoof} spoof)")]
    InsufficientClasses { bonafide: usize, spoof: usize },

    #[error("attack `{0}` has no TTS/VC mapping")]
    UnknownAttack(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
