//! Exact statevector training of a quantum convolutional neural network for
//! 4-class image classification, plus a small classical CNN baseline.
//!
//! Start with [`architecture::build_qcnn_circuit`] and [`training::train`];
//! runnable walkthroughs live in the crate's `examples/` directory.

pub mod architecture;
pub mod baseline;
pub mod circuit;
pub mod cli;
pub mod config;
pub mod data;
pub mod decompose;
pub mod encoding;
pub mod error;
pub mod persist;
pub mod statevector;
pub mod training;

pub use error::{Error, Result};
