//! File formats, dataset export and the command-line front end for
//! [`leyes_core`].

pub mod cli;
pub mod dataset;
pub mod frames;
pub mod maps;
pub mod merge;
pub mod records;
pub mod session;
