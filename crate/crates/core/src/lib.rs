//! Joint learning of multiple kernel task predictors and their output
//! structure matrix, with convex reformulation, barrier continuation and
//! block-coordinate solvers.

pub mod benchmark;
pub mod config;
pub mod data;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod metrics;
pub mod model_io;
pub mod objectives;
pub mod oracles;
pub mod penalties;
pub mod solver;
pub mod synth;

pub use error::{ErrorClass, Result, SmtlError};
