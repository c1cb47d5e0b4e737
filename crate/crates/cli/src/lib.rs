//! Support code for the `padic-theta` binary.

pub mod bench;
