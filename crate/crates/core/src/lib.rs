//! Operator-learning testbed for the one-dimensional variable-speed wave
//! equation.
//!
//! A conservative finite-difference solver produces training pairs
//! `(u0, c) -> u(T)`, and two neural operators (a Fourier neural operator and
//! a DeepONet) learn that map. Evaluation helpers measure in-distribution and
//! shifted-distribution error, per-mode spectral error, and the effect of the
//! retained Fourier mode count.

pub mod autodiff;
pub mod binfmt;
pub mod cli;
pub mod data;
pub mod evaluation;
pub mod io;
pub mod operators;
pub mod solver;
pub mod trainer;
