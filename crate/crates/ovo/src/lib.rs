//! One-Versus-Others (OvO) multimodal attention, compared against early-fusion
//! self-attention and pairwise cross-attention on a synthetic benchmark.
//!
//! The crate provides:
//! - a small dense linear-algebra core with FLOP instrumentation ([`numerics`]),
//! - tape-based reverse-mode differentiation ([`autograd`]),
//! - the three attention mechanisms ([`attention`]) and end-to-end fusion
//!   pipelines ([`fusion`]),
//! - dual FLOP accounting: an instrumented counter plus an analytic
//!   complexity model that must agree exactly ([`flops`]),
//! - a synthetic multimodal dataset generator ([`simdata`]),
//! - training, multi-seed aggregation and significance testing ([`train`]),
//! - the `ovo` command-line surface ([`cli`]).
//!
//! See the crate examples for runnable entry points into each capability.

pub mod attention;
pub mod autograd;
pub mod cli;
pub mod flops;
pub mod fusion;
pub mod numerics;
pub mod simdata;
pub mod train;

mod error;

pub use error::{Error, Result};
