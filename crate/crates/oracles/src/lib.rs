//! Hand-built fixtures and deliberately naive reference checkers.
//!
//! Nothing here calls into the algorithms under test beyond the plain data
//! types, so the suites can compare the library against independent answers.

pub mod brute;
pub mod fixtures;
pub mod random;
pub mod reference;
