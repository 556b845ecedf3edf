//! Verification toolkit for microlocal lifts, Hecke amplifiers and
//! off-diagonal bounds attached to GL(n+1) x GL(n) periods over Q_p.

pub mod arith;
pub mod cache;
pub mod chargeo;
pub mod compat;
pub mod config;
pub mod error;
pub mod exponents;
pub mod hecke;
pub mod matgroup;
pub mod mlift;
pub mod offdiag;
pub mod report;
pub mod rtfmodel;
pub mod suites;

pub use error::{Error, Result};
