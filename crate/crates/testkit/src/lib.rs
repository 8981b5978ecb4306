//! Shared test support: random instance generators, deliberately naive
//! reference implementations, output validity checks and finite-difference
//! gradient checks.

pub mod check;
pub mod gen;
pub mod grad;
pub mod oracle;
