use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate spectrum: entries {i} and {j} coincide ({value})")]
    DegenerateSpectrum { i: usize, j: usize, value: f64 },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("saddle search did not converge after {iterations} outer steps (best value {best_value:.6} at lambda {best_lambda:.6e})")]
    NonConvergence {
        iterations: usize,
        best_value: f64,
        best_lambda: f64,
        /// (lambda, sup_D g) pairs visited by the outer search.
        trace: Vec<(f64, f64)>,
    },

    #[error("optimizer failure: {0}")]
    Optimizer(String),

    #[error("inner expectation has nonpositive total with {inner_samples} inner samples")]
    NegativeInnerAverage { inner_samples: usize },

    #[error("perturbation extrapolation unstable: delta {delta:.3e} exceeds 10x std_error {std_error:.3e}")]
    PerturbationInstability { delta: f64, std_error: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed csv at {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("malformed json at {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn dimension(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}
