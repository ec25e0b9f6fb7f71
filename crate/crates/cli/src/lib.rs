//! Command-line front end for the convex biclustering library.

pub mod commands;
pub mod error;
pub mod io;
