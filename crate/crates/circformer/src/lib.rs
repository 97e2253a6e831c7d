//! circformer maps between arithmetic circuits over exact rationals and
//! generalized hard-attention transformers.
//!
//! The crate has three layers:
//!
//! * a circuit model ([`circuit`]) with validation, exact evaluation and a
//!   text format, plus the sequence encoding of circuits ([`encoding`]);
//! * a transformer executor ([`engine`]) over exact rationals and a factory
//!   of simulating transformers ([`constructions`]), one per supported
//!   circuit class;
//! * a compiler ([`circuitizer`]) that unrolls a transformer at a fixed
//!   sequence length back into a single constant-depth circuit with `sign`
//!   gates.
//!
//! Everything is exact: simulation and compilation results are checked
//! against the direct circuit evaluator with equality, never tolerance.

pub mod circuit;
pub mod circuitizer;
pub mod constructions;
pub mod encoding;
pub mod engine;
pub mod gadget;
pub mod numerics;

pub use numerics::Rational;
