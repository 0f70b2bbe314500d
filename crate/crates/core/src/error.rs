use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("degenerate frequency: spatial norm {0:e} below {1:e}")]
    DegenerateFrequency(f64, f64),
    #[error("stencil of order {order} needs {needed} nodes along axis {axis}, grid has {have}")]
    StencilExceedsGrid {
        axis: usize,
        order: u32,
        needed: usize,
        have: usize,
    },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("empty probe set")]
    EmptyProbeSet,
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
