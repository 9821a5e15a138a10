//! Exact arithmetic for truncated p-adic Laurent, Robba and Tate series.
//!
//! The crate is organised bottom-up:
//!
//! * [`padic`]: the coefficient field K = O[1/pi] with precision tracking,
//! * [`laurent`]: bidirectional series modelling Gamma, Gamma_con and the Robba ring,
//! * [`sigma`]: sigma-modules, Tate twists, Hom modules and Newton slopes,
//! * [`solve`]: solvers for `lambda y^sigma - y = x` and `-X + A X^sigma D^-1 = B`,
//! * [`tate`]: Tate algebras, Gauss norms, Weierstrass preparation and T_j,
//! * [`qs`]: reduction of unimodular tuples to (1, 0, ..., 0) with certificates,
//! * [`json`]: the wire formats used by the command-line tool,
//! * [`suites`]: seeded randomized round-trip suites.

pub mod error;
pub mod laurent;
pub mod json;
pub mod matrix;
pub mod padic;
pub mod qs;
pub mod random;
pub mod sigma;
pub mod solve;
pub mod suites;
pub mod tate;

pub use error::{Error, Result};
pub use laurent::{LaurentSeries, RingTag, SigmaAction};
pub use matrix::{Mat, Ring};
pub use padic::{PAdic, Prec, RingConfig, Valuation, EXACT};
