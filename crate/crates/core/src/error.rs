use alloc::string::String;
use core::fmt;

/// Errors reported by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    Domain { what: &'static str, value: f64 },
    /// Input data violates a structural requirement.
    Validation(String),
    /// `k^2 - q_i <= 0` in some layer; the solver only handles `κ_i^2 > 0`.
    UnsupportedRegime {
        layer: usize,
        value: f64,
        energy: f64,
    },
    /// A layer or slot index is out of range.
    IndexOutOfRange { index: usize, len: usize },
    /// The normalizing average norm of a minimizer pool vanished.
    DegeneratePool,
    /// The variable-phase integrator failed to reach its tolerance.
    Oracle(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "{what} out of domain: {value}"),
            Error::Validation(msg) => write!(f, "invalid input: {msg}"),
            Error::UnsupportedRegime {
                layer,
                value,
                energy,
            } => write!(
                f,
                "layer {layer} has q = {value} >= k^2 = {energy}; only k^2 > q is supported"
            ),
            Error::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for {len} entries")
            }
            Error::DegeneratePool => f.write_str("average norm of the minimizer pool is zero"),
            Error::Oracle(msg) => write!(f, "variable-phase integration failed: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
