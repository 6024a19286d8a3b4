use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("symbol table line {line}: {msg}")]
    SymbolTable { line: usize, msg: String },
    #[error("symbol table violates join laws: {0}")]
    SymbolLaw(String),
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("{0}")]
    Desugar(String),
    #[error("formula error: {0}")]
    Formula(String),
    #[error("invalid step: {0}")]
    InvalidStep(String),
    #[error("trace error: {0}")]
    Trace(String),
    #[error("{0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;
