// SPDX-License-Identifier: Apache-2.0

//! Std companion of `tbloop-core`: configuration, JSONL rows, the process
//! simulator, the HTTP chat client and the batch commands behind the CLI.

pub mod backends;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod gradcheck;
pub mod http;
pub mod process;
pub mod rows;

pub use config::Config;
pub use error::CliError;
