pub mod cli;
pub mod embed;
pub mod error;
pub mod encoder;
pub mod io;
pub mod kv;
pub mod spectra;
pub mod property;
pub mod search;
pub mod similarity;
pub mod synthetic;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
