//! Deep linear networks trained by gradient descent, and the end-to-end
//! update rules that reproduce their dynamics on the collapsed matrix.

pub mod error;
pub mod matcore;
pub mod model;
pub mod objective;
pub mod optim;
pub mod verify;

pub use error::{Error, Result};
