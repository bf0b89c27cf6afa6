//! Standard-library companion to `nearopt-core`: file formats, the HTTP service and the
//! command line.

pub mod cli;
pub mod io;
pub mod service;
