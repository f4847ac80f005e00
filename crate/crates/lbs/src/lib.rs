//! Network and command-line front ends for the location services core.

pub mod cli;
pub mod interactive;
pub mod web;
