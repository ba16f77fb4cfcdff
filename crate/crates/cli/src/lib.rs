//! Command implementations and the annotation service behind the `jpt` binary.

pub mod commands;
pub mod config;
pub mod service;
