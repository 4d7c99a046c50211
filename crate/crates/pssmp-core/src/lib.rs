// Validation guards are written `!(x > 0.0)` on purpose: unlike
// `x <= 0.0`, the negation also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Monte Carlo laboratory for positive self-similar Markov processes.
//!
//! The crate is organized around the Lamperti transform: a driving Levy
//! process (module [`levy`]) is carried into a positive self-similar
//! Markov process (module [`lamperti`]); the exponential functional of
//! the dual process (module [`expfun`]) governs absorption times,
//! entrance laws, last-passage times and the lower envelope. Module
//! [`reversal`] builds the time-reversal and last-passage decompositions,
//! and module [`envelope`] holds the integral-test classifier and
//! iterated-logarithm scaling machinery. Modules [`stats`] and [`rng`]
//! supply the test backends and reproducible parallel random streams.

pub mod envelope;
pub mod expfun;
pub mod lamperti;
pub mod levy;
pub mod reversal;
pub mod rng;
pub mod stats;
