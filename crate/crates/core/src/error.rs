use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("truncation at n_max={n_max} leaves tail {tail:e} (limit {limit:e})")]
    Truncation { n_max: usize, tail: f64, limit: f64 },
    #[error(
        "graph not series-parallel reducible: stuck with {nodes} nodes and {links} links, \
         which contain a {minor} minor"
    )]
    Irreducible {
        minor: &'static str,
        nodes: usize,
        links: usize,
        remaining: String,
    },
    #[error("stochasticity violated: {0}")]
    Stochasticity(String),
    #[error("step size too large: |dchi| = {delta} at t = {t}")]
    StepSize { t: f64, delta: f64 },
}

impl Error {
    /// True for failures that come from bad inputs rather than numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Range(_) | Error::Irreducible { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn check_unit(name: &str, x: f64) -> Result<()> {
    if x.is_nan() || !(0.0..=1.0).contains(&x) {
        return Err(domain(format!("{name} = {x} outside [0, 1]")));
    }
    Ok(())
}
