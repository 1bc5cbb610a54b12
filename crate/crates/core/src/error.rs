use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Inputs that do not belong together (wrong mark space, wrong dimension).
    #[error("usage error: {0}")]
    Usage(String),

    /// Invalid model or sampler configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// The flow integrator could not meet its tolerance.
    #[error("integrator failure at t = {t}: {reason}")]
    Integrator { t: f64, reason: String },

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    /// Two points of a configuration share a base point.
    #[error("duplicate base point {point:?}{}", seed_hint(*.sample))]
    DuplicateBasePoint { point: Vec<f64>, sample: Option<u64> },

    /// A function left its admissible domain (for example φ ≤ −1 in a Poisson exponential).
    #[error("domain violation: {0}")]
    Domain(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

fn seed_hint(sample: Option<u64>) -> String {
    match sample {
        Some(i) => format!(" (sample index {i})"),
        None => String::new(),
    }
}

impl Error {
    /// True for failures of numerical machinery rather than of inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Integrator { .. } | Error::Quadrature(_) | Error::Domain(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
