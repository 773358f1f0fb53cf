use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("angle {0}° is outside [-90°, 90°]")]
    AngleOutOfRange(f64),

    #[error("invalid parameter: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{context}: matrix is singular or ill-conditioned (condition number {condition:.3e})")]
    Singular {
        context: &'static str,
        condition: f64,
    },

    #[error("{n_training} training tones cannot resolve {unknowns} unknown channel rows")]
    InvertibilityBound { n_training: usize, unknowns: usize },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
