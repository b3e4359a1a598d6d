use crate::interval_sheaf::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain mismatch: inner target {inner_target} does not equal outer source {outer_source}")]
    DomainMismatch { inner_target: f64, outer_source: f64 },

    #[error("Hom({source_len}, {target_len}) does not contain offset {offset}")]
    EmptyHom {
        source_len: f64,
        target_len: f64,
        offset: f64,
    },

    #[error("restriction [{offset}, {offset}+{new_length}] exceeds trajectory length {length}")]
    OutOfRange {
        new_length: f64,
        offset: f64,
        length: f64,
    },

    #[error("{what} = {value} is not a multiple of the grid step {step}")]
    MisalignedOffset {
        what: &'static str,
        value: f64,
        step: f64,
    },

    #[error("junction defect {defect:e} exceeds tolerance {tolerance:e}")]
    JunctionMismatch { defect: f64, tolerance: f64 },

    #[error("shift bookkeeping: right shift {right} should be {expected}")]
    ShiftMismatch { right: f64, expected: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("not a member of `{behavior}`: residual {residual:e} > tolerance {tolerance:e}")]
    NotAMember {
        behavior: String,
        residual: f64,
        tolerance: f64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("blow-up at t = {time} (last finite node)")]
    BlowUp {
        time: f64,
        truncated: Box<Trajectory>,
    },

    #[error("structure violation ({what}) at x = {point:?}: {value:e}")]
    StructureViolation {
        what: String,
        point: Vec<f64>,
        value: f64,
    },

    #[error("noninteraction violation ({what}) at x = {point:?}: {value:e}")]
    NoninteractionViolation {
        what: String,
        point: Vec<f64>,
        value: f64,
    },

    #[error("constraint `{condition}` violated at node {node} (t = {time}): {value:e}")]
    ConstraintViolation {
        condition: String,
        node: usize,
        time: f64,
        value: f64,
    },

    #[error("trajectory carries no auxiliary Hamiltonian tag")]
    MissingAuxTag,

    #[error("closed machine leg is not constant: spread {spread:e}")]
    NotClosed { spread: f64 },

    #[error("leg `{leg}` does not commute with restriction: defect {defect:e}")]
    LegNotNatural { leg: String, defect: f64 },

    #[error("unknown channel `{0}`")]
    UnknownChannel(String),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed trajectory file, line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
