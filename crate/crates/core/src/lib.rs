//! Exact symbolic engine and numeric companions for the Virasoro module
//! structure of local martingales of SLE variants.
//!
//! The crate is organized around the objects of the theory:
//!
//! - [`scalar`]: the coefficient field Q(t) with kappa = t^2;
//! - [`poly`], [`series`]: multivariate polynomials and truncated formal
//!   Laurent series at infinity (the residue-calculus substrate);
//! - [`funcspace`]: the implementable subspace of functions of SLE data —
//!   finite sums of fractional-power difference prefactors times polynomials;
//! - [`virasoro`]: the first-order differential operators L_n acting there;
//! - [`sle`]: SLE variants, null-field and drift operators, and the module
//!   M = U(vir) Z of local martingales with singular/null-vector detection;
//! - [`fock`]: charged Fock spaces, vertex operators, the map-implementing
//!   operator G_f, and Coulomb-gas state construction;
//! - [`geometry`]: multiple-SLE pure geometries, pairing enumeration and
//!   Feigin-Fuchs integrals by Gauss-Jacobi quadrature;
//! - [`sim`]: Euler-Maruyama simulation and statistical martingale checks;
//! - [`suite`]: the end-to-end verification suite driven by the CLI.

pub mod error;
pub mod scalar;
pub mod poly;
pub mod series;
pub mod funcspace;
pub mod linalg;
pub mod virasoro;
pub mod sle;

pub use error::{Error, Result};
