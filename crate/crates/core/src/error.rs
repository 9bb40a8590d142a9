use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("non-finite value at cell {cell}")]
    NonFinite { cell: i64 },

    #[error("field length {got} does not match window length {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("mesh widths differ: {a} vs {b}")]
    TauMismatch { a: f64, b: f64 },

    #[error("window [{j_min}, {j_max}] is not aligned to factor {factor}")]
    Misaligned { j_min: i64, j_max: i64, factor: i64 },

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("ODE flow produced a non-finite value at substep {substep}")]
    FlowDiverged { substep: usize },

    #[error("cell {cell}: {source}")]
    AtCell {
        cell: i64,
        #[source]
        source: Box<Error>,
    },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("step index {n} outside [{lo}, {hi}]")]
    StepOutOfRange { n: i64, lo: i64, hi: i64 },

    #[error("history has {frames} frames but step {needed} is required")]
    InsufficientHistory { frames: usize, needed: usize },

    #[error("constant `{formula}` is not representable in binary64")]
    ConstantOverflow { formula: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config: {0}")]
    Config(String),

    #[error("line {line} (frame {frame}): {msg}")]
    Format {
        line: usize,
        frame: usize,
        msg: String,
    },

    #[error("window of {cells} cells exceeds the cap of {cap}")]
    CellCap { cells: usize, cap: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_cell(self, cell: i64) -> Self {
        Error::AtCell {
            cell,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }
}
