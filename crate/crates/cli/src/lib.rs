//! Command-line front end: file codecs, run configuration, the oracle
//! self-test and the benchmark driver.

pub mod bench;
pub mod commands;
pub mod config;
pub mod jsonl;
pub mod pnm;
pub mod selftest;
