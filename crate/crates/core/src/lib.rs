//! Core library for `hopcirc`: exact emulation of p-bit floating point,
//! dense linear algebra and Hopfield-style attention layers over it,
//! a threshold-circuit IR with symbolic depth accounting, a lowering
//! pass from network forward passes to gate-level circuits, and
//! generators/oracles for a family of hard decision problems plus a
//! chain-of-thought harness that runs them through a small decoder.
//!
//! Everything here is deterministic: random data flows exclusively
//! through the seeded [`rng::SplitMix64`] stream, and all arithmetic is
//! integer-exact (see [`fp`]) so results are reproducible bit for bit
//! across platforms.

pub mod circuit;
pub mod encoding;
pub mod fp;
pub mod hopfield;
pub mod kernel;
pub mod linalg;
pub mod lower;
pub mod cot;
pub mod problems;
pub mod rng;
