//! Exact arithmetic for paramodular forms of degree two.
//!
//! The crate is organised around a few layers:
//!
//! * [`series`] — Laurent series in `q` whose coefficients are Laurent
//!   polynomials in `zeta`, with exact rational coefficients throughout.
//! * [`theta`] — eta powers, theta functions and theta blocks built on top of
//!   the series layer.
//! * [`jacobi`] — Jacobi form expansions indexed by `(n, r)` with the
//!   elliptic transformation law baked in, plus the `V_l` operators.
//! * [`siegel`] — degree-two Fourier expansions indexed by semidefinite
//!   forms, canonical class reduction, Gritsenko lifts and Atkin–Lehner
//!   pullbacks.
//! * [`borcherds`] — Borcherds products: input data, divisor computations and
//!   the two independent expansion routes (infinite product vs. theta block
//!   times an exponential).
//! * [`restriction`], [`weight4`] — linear-algebra-on-coefficients methods
//!   that bound dimensions of spaces of forms and certify weight-two spaces
//!   from weight-four data.
//! * [`symplectic`], [`trace`], [`hecke`] — coset machinery for the
//!   paramodular group, trace-down maps between levels, and Hecke operators
//!   at good primes with their spin Euler factors.
//!
//! Everything is exact: `BigRational` scalars, `BigInt` matrices, and modular
//! arithmetic only where explicitly requested.

pub mod borcherds;
pub mod cyclotomic;
pub mod files;
pub mod hecke;
pub mod intmat;
pub mod jacobi;
pub mod linalg;
pub mod number;
pub mod restriction;
pub mod series;
pub mod siegel;
pub mod symplectic;
pub mod theta;
pub mod trace;
pub mod weight4;

/// Crate-wide error type.
///
/// The variants map onto the distinct failure modes a caller can act on:
/// bad input text, a mathematically invalid request, insufficient stored
/// precision, an I/O problem, or a verification that ran fine but came out
/// false.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input text (a theta block spec, a data file, ...) could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// The request is mathematically invalid for the given arguments.
    #[error("{0}")]
    Domain(String),

    /// The stored precision is too low to answer the request.
    #[error("precision shortfall: {0}")]
    Precision(String),

    /// A check that was supposed to hold came out false.
    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn precision(msg: impl Into<String>) -> Self {
        Error::Precision(msg.into())
    }

    pub fn verification(msg: impl Into<String>) -> Self {
        Error::Verification(msg.into())
    }
}
