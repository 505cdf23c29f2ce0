use thiserror::Error;

use crate::gates::GateKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cannot normalize the zero state")]
    DegenerateState,

    #[error("non-finite amplitude {re} + {im}i")]
    NonFiniteAmplitude { re: f64, im: f64 },

    #[error("label arithmetic overflowed: {lhs} {op} {rhs}")]
    LabelOverflow { lhs: i64, op: char, rhs: i64 },

    #[error("strict multiplication is undefined for first label {label}")]
    TimesDomain { label: i64 },

    #[error("ancilla register {register} holds label {label}, expected 0")]
    AncillaNotZero { register: usize, label: i64 },

    #[error("{gate} expects {expected} distinct register roles below {width}, got {roles:?}")]
    BadRoles {
        gate: GateKind,
        expected: usize,
        width: usize,
        roles: Vec<usize>,
    },

    #[error("state has {found} registers, expected {expected}")]
    RegisterMismatch { expected: usize, found: usize },

    #[error("step {index}: {source}")]
    Step {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("|n|+|m| = {span} must stay below D/2 = {half} to avoid wrap-around")]
    Aliasing { span: i64, half: i64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("integration step {dt} must lie in (0, {max}]")]
    StepSize { dt: f64, max: f64 },

    #[error("term takes {expected} arguments, got {found}")]
    ArityMismatch { expected: usize, found: usize },

    #[error("{0} is not a bit")]
    NotABit(i64),

    #[error("class {class} terms have indices beyond the supported range")]
    IndexOverflow { class: usize },

    #[error("state is not a single basis vector ({support} terms)")]
    NotBasis { support: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Strips any `Step` wrappers to expose the originating error.
    pub fn root(&self) -> &Error {
        match self {
            Error::Step { source, .. } => source.root(),
            other => other,
        }
    }
}
