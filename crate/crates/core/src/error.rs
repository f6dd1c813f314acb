use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid propeller index {0}, expected 0..=3")]
    InvalidPropeller(usize),
    #[error("invalid QP problem: {0}")]
    InvalidProblem(String),
    #[error("Riccati solver failed: {0}")]
    Riccati(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
