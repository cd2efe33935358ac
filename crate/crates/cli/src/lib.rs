//! Command-line front end for the gaze3d pipeline.

pub mod commands;
pub mod config;
pub mod manifest;
