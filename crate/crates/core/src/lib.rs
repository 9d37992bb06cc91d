//! Simulation lab for agnostic language identification and generation.
//!
//! Strings are addressed by their position in a fixed universe enumeration,
//! languages are eventually periodic index sets, and every experiment is a
//! pure function of its configuration and seed.

pub mod adversary;
pub mod cli;
pub mod config;
pub mod distributions;
pub mod error;
pub mod eval;
pub mod generate;
pub mod identify;
pub mod languages;
pub mod universe;

pub use error::{Error, Result};
