//! Z2 synchronization on finite boxes of the integer lattice.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod gibbs;
pub mod io;
pub mod lattice;
pub mod model;
pub mod multiscale;
pub mod pipeline;
pub mod renorm;
pub mod rng;
pub mod sideinfo;
pub mod stats;

pub use error::{Error, Result};
