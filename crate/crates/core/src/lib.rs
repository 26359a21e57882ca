pub mod allocation;
pub mod diagnosis;
pub mod error;
pub mod fixtures;
pub mod gateway;
pub mod harness;
pub mod hybrid;
mod par;
pub mod payload;
pub mod pipeline;
pub mod stats;
pub mod synthesis;
pub mod taxonomy;

pub use error::{Error, Result};
