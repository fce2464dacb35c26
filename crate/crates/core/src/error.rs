use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument fell outside the domain of the function.
    #[error("{function}: argument {value} outside domain ({expected})")]
    Domain {
        function: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("quadrature did not converge after {subdivisions} subdivisions (estimate {estimate:e}, error {error:e})")]
    Quadrature {
        subdivisions: usize,
        estimate: f64,
        error: f64,
    },

    /// Two distinct partial-fraction poles are too close for a stable expansion.
    #[error("poles {first} and {second} are distinct but closer than the clustering tolerance {tolerance:e}")]
    PoleClustering {
        first: f64,
        second: f64,
        tolerance: f64,
    },

    #[error("closed form supports at most {max} relays, got {got}")]
    TooManyRelays { max: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub(crate) fn domain(function: &'static str, value: f64, expected: &'static str) -> Error {
    Error::Domain {
        function,
        value,
        expected,
    }
}
