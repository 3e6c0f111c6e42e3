//! Simulation and experiment harness for qudit variational multi-objective
//! optimization.
//!
//! A circuit of alternating cost-phase and mixer blocks prepares a state over
//! `d^N` basis states; the most probable (or most frequently measured) states
//! are scored by the hypervolume of their normalized cost vectors, and a
//! derivative-free optimizer tunes the circuit angles. Exhaustive Pareto
//! oracles and an NSGA-II baseline supply the reference numbers.

pub mod benchmarks;
pub mod campaign;
pub mod circuit;
pub mod error;
pub mod moea;
pub mod moo;
pub mod operators;
pub mod optim;
pub mod rng;
pub mod statevector;

pub use error::{QmooError, Result};
