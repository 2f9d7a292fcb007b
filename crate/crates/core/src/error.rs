use thiserror::Error;

/// Why a deductive rule refused to fire on an item.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inapplicable {
    CoverageConflict,
    OutsideConstraint,
    ConstraintStarted,
    ConstraintIncomplete,
    TooLong,
    InsertionLimit,
    StackMismatch,
    StackUnderflow,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coverage conflict at source position {0}")]
    CoverageConflict(usize),

    #[error("malformed corpus at line {line}: {msg}")]
    MalformedCorpus { line: usize, msg: String },

    #[error("format error at line {line}: {msg}")]
    Format { line: usize, msg: String },

    #[error("malformed alignment: {0}")]
    MalformedAlignment(String),

    #[error("no training data")]
    NoData,

    #[error("malformed markup at {tag:?}: {msg}")]
    MalformedMarkup { tag: String, msg: String },

    #[error("conflicting constraints: spans {0:?} and {1:?} overlap")]
    ConflictingConstraints((usize, usize), (usize, usize)),

    #[error("rule not applicable: {0:?}")]
    RuleNotApplicable(Inapplicable),

    #[error("no derivation; uncovered source positions {uncovered:?}")]
    NoDerivation { uncovered: Vec<usize> },

    #[error("oracle search space exceeds cap of {cap} items")]
    OracleTooLarge { cap: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
