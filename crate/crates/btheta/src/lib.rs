//! Enumerate, test and count members of theta-chain sets: the practical
//! numbers, integers with y-dense divisors, and scaled or custom variants.
//!
//! The membership primitive is the chain condition over the ascending prime
//! factorization; everything else (segmented enumeration, shifted-prime and
//! pair counters, conjecture sweeps, weighted sums) is built on top of it.
//! Independent brute-force oracles (divisor subset sums, consecutive divisor
//! ratios) ship alongside for cross-validation.

pub mod arith;
pub mod counters;
pub mod error;
pub mod job;
pub mod sieve;
pub mod theta;

pub use error::{Error, Result};
pub use theta::{MembershipVerdict, Rational, Rational128, ThetaKind, ThetaSpec};
