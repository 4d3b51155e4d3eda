//! Variable-length feedback (VLF) coding: achievability bounds for codes
//! with a sequential hypothesis-testing confirmation phase, universal
//! decoders based on empirical statistics, a Monte-Carlo simulator and exact
//! reference computations.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bounds;
pub mod channel;
pub mod engine;
pub mod numeric;
pub mod oracle;
pub mod types;
