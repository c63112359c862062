pub mod error;
pub mod initlab;
pub mod jets;
pub mod network;
pub mod pde;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
