#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::type_complexity
)]

pub mod cohort;
pub mod error;
pub mod featspace;
pub mod hyptest;
pub mod numerics;
pub mod pipeline;
pub mod report;
pub mod resample;
pub mod rng;
pub mod synth;
