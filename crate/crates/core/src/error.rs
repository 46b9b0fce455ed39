use thiserror::Error;

use crate::expr::ExprError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid equation: {0}")]
    InvalidSpec(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("decomposition ({n1}, {n2}) out of range for {n} delay channels")]
    Decomposition { n1: usize, n2: usize, n: usize },
    #[error("channel index {k} outside 1..={max}")]
    ChannelIndex { k: usize, max: usize },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("delay {delay} is not a multiple of dt = {dt}")]
    DelaySnap { delay: f64, dt: f64 },
    #[error("spec file: {0}")]
    SpecFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
