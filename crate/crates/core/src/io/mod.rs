//! Weight archives, PNG images and the command-line front end.

pub mod archive;
pub mod cli;
mod png;

pub use archive::{load_weights, save_weights, Archive, ArchiveError};
pub use png::{encode_png, read_png, write_png};
