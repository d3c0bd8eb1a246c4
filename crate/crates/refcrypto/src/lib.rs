//! Reference crypto implementations for cross-checking.
//!
//! Everything in this crate is written from first principles (straight from
//! the published algorithm descriptions, using `num-bigint` for field
//! arithmetic) and is deliberately independent of the crates backing the
//! production path. Test suites compare the two routes against each other;
//! nothing here is meant to be fast or constant-time.

pub mod aes;
pub mod cmac;
pub mod p256;
pub mod sha256;
