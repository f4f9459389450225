use thiserror::Error;

use crate::automata::{StateId, Symbol};

#[derive(Debug, Error)]
pub enum Error {
    #[error("symbols must be non-empty")]
    EmptySymbol,

    #[error("input matches more than one trace format: {0}")]
    AmbiguousFormat(String),

    #[error("unparseable input at line {line}: {message}")]
    UnparseableInput { line: usize, message: String },

    #[error("traces disagree on the initial output: expected {expected:?}, found {found:?} in trace {trace}")]
    InconsistentInitialOutput {
        trace: usize,
        expected: Option<Symbol>,
        found: Option<Symbol>,
    },

    #[error("nondeterminism in data after prefix {prefix:?}: input {input} observed with outputs {first} and {second}")]
    NondeterminismInData {
        prefix: Vec<(Symbol, Symbol)>,
        input: Symbol,
        first: Symbol,
        second: Symbol,
    },

    #[error("word {word:?} has conflicting labels {first} and {second}")]
    ConflictingLabels {
        word: Vec<Symbol>,
        first: Symbol,
        second: Symbol,
    },

    #[error("{kind} data cannot be learned with {behavior}")]
    UnsupportedData { kind: String, behavior: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("partition was computed for model version {expected}, model is at version {found}")]
    StalePartition { expected: u64, found: u64 },

    #[error("model violates {predicate} at state {witness}")]
    StructureViolation { predicate: String, witness: StateId },

    #[error("no outgoing mass for state {state} on input {input}")]
    ZeroMass { state: StateId, input: Symbol },

    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("state {0} has no outgoing transitions, trace cannot be extended")]
    DeadEnd(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
