use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The law has no finite second moment for the requested parameters.
    #[error("unsupported law: {0}")]
    UnsupportedLaw(String),

    /// `f(a_n)` vanished so the Falk scale is undefined.
    #[error("degenerate scale: density at a_n = {a_n} is zero")]
    DegenerateScale { a_n: f64 },

    /// The tail `1 - F(x)` underflowed, so `x f(x) / (1 - F(x))` is undefined.
    #[error("von Mises ratio undefined at x = {x}: tail probability is zero")]
    DivisionDegenerate { x: f64 },
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
