// SPDX-License-Identifier: Apache-2.0

//! Core of the testbench-feedback toolkit.
//!
//! Everything here is allocation-only and free of IO: the Verilog subset
//! frontend, similarity metrics, simulator-output parsing, prompt templates,
//! the Analyze/Draft/Improve/Rectify state machine (driven through the
//! [`llm::ChatBackend`] and [`sim::SimBackend`] traits), preference-pair
//! rules, pass@k and perplexity, and the DPO loss with its analytic gradient.

#![no_std]

extern crate alloc;

pub mod dpo;
pub mod llm;
pub mod metrics;
pub mod pipeline;
pub mod preference;
pub mod sim;
pub mod similarity;
pub mod verilog;
