//! End-to-end orchestration over persisted, line-delimited artifacts.

pub mod commands;
pub mod config;
pub mod files;
pub mod report;
pub mod runtime;

pub use commands::*;
pub use config::{Config, Models, SplitConfig, DEFAULT_BASE_PROMPT};
pub use report::{report, summarize, Report, SummaryRow};
pub use runtime::{Runtime, RuntimeOptions};
