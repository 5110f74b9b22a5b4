use thiserror::Error;

use crate::ast::{PredKey, Value};

#[derive(Debug, Error)]
pub enum Error {
    #[error("{origin}:{line}:{column}: syntax error: {message}")]
    Syntax { origin: String, line: usize, column: usize, message: String },

    #[error("{origin}:{line}:{column}: undeclared sort `{sort}`")]
    UndeclaredSort { origin: String, line: usize, column: usize, sort: String },

    #[error("{origin}:{line}:{column}: unsafe rule: variable `{variable}` is not bound by a positive body atom")]
    Unsafe { origin: String, line: usize, column: usize, variable: String },

    #[error("invalid mapping: {0}")]
    Mapping(String),

    #[error("constant `{constant}` of sort `{sort}` is not mapped to any class")]
    UnmappedConstant { constant: Value, sort: String },

    #[error("cannot determine the sort of constant `{constant}` in {predicate}")]
    AmbiguousConstant { constant: Value, predicate: PredKey },

    #[error("cannot infer the sort of variable `{variable}` in rule `{rule}`")]
    UnknownVariableSort { variable: String, rule: String },

    #[error("comparison between sorts `{left}` and `{right}` is not supported")]
    MixedSorts { left: String, right: String },

    #[error("unsupported construct: {0}")]
    Unsupported(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("invalid refinement: {0}")]
    Refinement(String),

    #[error("policy harness: {0}")]
    Policy(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Resource(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
