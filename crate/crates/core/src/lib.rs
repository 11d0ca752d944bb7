//! Compile POVMs into adaptive sequences of two-outcome projective measurements.
//!
//! A POVM that commutes with a nontrivial projector can be realized by measuring
//! that projector first and then a chain of rank-one binary measurements on each
//! branch. [`realizability`] finds such a projector, [`compiler`] builds the
//! [`tree::ProtocolTree`], [`simulator`] runs it on states and [`verifier`]
//! checks it against the original POVM. POVMs with no such projector can be
//! embedded into one extra dimension first.

pub mod cli;
pub mod compiler;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod numerics;
pub mod quantum;
pub mod realizability;
pub mod simulator;
pub mod tree;
pub mod verifier;
