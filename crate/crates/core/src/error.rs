use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("elliptic modulus {0} outside [0, 1)")]
    ModulusOutOfRange(f64),

    #[error("argument {value} outside the admissible range {range}")]
    ArgumentOutOfRange { value: f64, range: &'static str },

    #[error("pole of {function} near u = {re} + {im}i")]
    Pole {
        function: &'static str,
        re: f64,
        im: f64,
    },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("angle {angle} violates the isoradial margin epsilon = {epsilon}")]
    AngleOutOfRange { angle: f64, epsilon: f64 },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("vertex {0:?} is not in the built window")]
    OutsideWindow(Vec<i32>),

    #[error("vertex is not flippable: {0}")]
    NotFlippable(String),

    #[error("x and y coincide")]
    CoincidentVertices,

    #[error("saddle bracketing failed: {0}")]
    Saddle(String),

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("graph is not periodic: {0}")]
    NotPeriodic(String),

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("graph spec parse error: {0}")]
    Parse(String),

    #[error("certification check {check} failed at index {index}")]
    Certification { check: String, index: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
