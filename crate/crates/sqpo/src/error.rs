//! Crate-wide error type with stable machine-readable codes.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("not a valid homomorphism: {0}")]
    InvalidHomomorphism(String),
    #[error("not a monomorphism: {0}")]
    NotMono(String),
    #[error("invalid span: {0}")]
    InvalidSpan(String),
    #[error("invalid cospan: {0}")]
    InvalidCospan(String),
    #[error("square does not commute: {0}")]
    NonCommutingSquare(String),
    #[error("mediating arrow is ill-defined: {0}")]
    MediatorIllDefined(String),
    #[error("invalid rule: {0}")]
    InvalidRule(String),
    #[error("instance mismatch: {0}")]
    InstanceMismatch(String),
    #[error("rewrite is not reversible: {0}")]
    NotReversible(String),
    #[error("no match for pattern: {0}")]
    NoMatch(String),
    #[error("skeleton has a cycle: {0}")]
    CycleDetected(String),
    #[error("hierarchy does not commute: {0}")]
    CommutativityViolation(String),
    #[error("rule homomorphism violation: {0}")]
    RuleHomViolation(String),
    #[error("rule hierarchy not applicable: {0}")]
    NotApplicable(String),
    #[error("propagation conflict: {0}")]
    PropagationConflict(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("name conflict: {0}")]
    NameConflict(String),
    #[error("unknown version: {0}")]
    UnknownVersion(String),
    #[error("invalid merge spec: {0}")]
    InvalidMergeSpec(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("parse error: {0}")]
    ParseError(String),
    #[error("schema error: {0}")]
    SchemaError(String),
    #[error("store corrupt: {0}")]
    StoreCorrupt(String),
    #[error("store format version mismatch: {0}")]
    VersionMismatch(String),
    #[error("store is locked: {0}")]
    StoreLocked(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable error code, used on the CLI's stderr.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DomainMismatch(_) => "DOMAIN_MISMATCH",
            Error::InvalidHomomorphism(_) => "INVALID_HOMOMORPHISM",
            Error::NotMono(_) => "NOT_MONO",
            Error::InvalidSpan(_) => "INVALID_SPAN",
            Error::InvalidCospan(_) => "INVALID_COSPAN",
            Error::NonCommutingSquare(_) => "NON_COMMUTING_SQUARE",
            Error::MediatorIllDefined(_) => "MEDIATOR_ILL_DEFINED",
            Error::InvalidRule(_) => "INVALID_RULE",
            Error::InstanceMismatch(_) => "INSTANCE_MISMATCH",
            Error::NotReversible(_) => "NOT_REVERSIBLE",
            Error::NoMatch(_) => "NO_MATCH",
            Error::CycleDetected(_) => "CYCLE_DETECTED",
            Error::CommutativityViolation(_) => "COMMUTATIVITY_VIOLATION",
            Error::RuleHomViolation(_) => "RULE_HOM_VIOLATION",
            Error::NotApplicable(_) => "NOT_APPLICABLE",
            Error::PropagationConflict(_) => "PROPAGATION_CONFLICT",
            Error::IndexOutOfRange(_) => "INDEX_OUT_OF_RANGE",
            Error::NameConflict(_) => "NAME_CONFLICT",
            Error::UnknownVersion(_) => "UNKNOWN_VERSION",
            Error::InvalidMergeSpec(_) => "INVALID_MERGE_SPEC",
            Error::InvalidState(_) => "INVALID_STATE",
            Error::ParseError(_) => "PARSE_ERROR",
            Error::SchemaError(_) => "SCHEMA_ERROR",
            Error::StoreCorrupt(_) => "STORE_CORRUPT",
            Error::VersionMismatch(_) => "VERSION_MISMATCH",
            Error::StoreLocked(_) => "STORE_LOCKED",
            Error::Io(_) => "IO_ERROR",
        }
    }
}
