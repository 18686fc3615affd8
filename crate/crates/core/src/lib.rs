//! A deterministic laboratory for delayed-feedback control.
//!
//! The crate simulates plants observed through a fixed delay, builds
//! controllers that reconstruct the current state from the delayed
//! observation and their own recent controls (forward models), and ships the
//! optimal-control machinery needed to show when such a reconstruction is
//! unavoidable: linear time-optimal (bang-bang) control with reachable-set
//! geometry, and minimum-jerk planning.
//!
//! Modules:
//! - [`dynamics`]: plants, fixed-step RK4, matrix exponential, closed-form linear solutions.
//! - [`delay`]: delayed observation channel and control memory.
//! - [`controllers`]: the controller contract, forward-model wrapper, concrete laws.
//! - [`tasks`]: tasks, switching schedules, cost functionals, correctness audits.
//! - [`minjerk`]: quintic minimum-jerk solver and pair-separability analysis.
//! - [`linopt`]: support functions, set separation, touching time, time-optimal synthesis.
//! - [`harness`]: scenario runner, counterexample generator, file formats.

pub mod controllers;
pub mod delay;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod linopt;
pub mod minjerk;
pub mod tasks;

pub use error::{Error, Result};

/// Dense real vector used for states and controls.
pub type Vector = nalgebra::DVector<f64>;
/// Dense real matrix.
pub type Matrix = nalgebra::DMatrix<f64>;
