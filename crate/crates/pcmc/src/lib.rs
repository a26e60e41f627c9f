//! File formats, JSON persistence, and the command-line front end for
//! `pcmc-core`.

pub mod cli;
pub mod io;
pub mod json;

pub use io::{load, save, DataError, Format};
pub use json::{model_from_json, model_to_json};
