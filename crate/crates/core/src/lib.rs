//! Arithmetic as quantum basis permutations.
//!
//! * [`hilbert`]: sparse states over the integer-labelled computational basis.
//! * [`gates`]: the adder and multiplier as label maps, plus gate programs.
//! * [`dynamics`]: a Hamiltonian realization of the adder with fidelity traces
//!   and stopping-time detection.
//! * [`logic`]: NOT, AND and OR as arithmetic, evaluated directly and on gates.
//! * [`termalg`]: composed operations over `M0`, `P`, `T`, their classes,
//!   ranking/unranking and dual (gate vs exact) evaluation.
//! * [`verify`] and [`cli`]: property suites and the command-line front end.

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod gates;
pub mod hilbert;
pub mod logic;
pub mod termalg;
pub mod verify;

pub use error::{Error, Result};
pub use gates::{GateKind, GateProgram};
pub use hilbert::{Amplitude, Ket, Label, MultiKet, TwoRegisterKet};
