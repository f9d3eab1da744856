//! Restriction and extension of Hamilton-Jacobi equations between `R^d` and an
//! embedded submanifold `M`.
//!
//! * [`geometry`]: projectors, second fundamental form, closest-point map, `v(q)`.
//! * [`hamiltonian`]: Hamiltonian fields, flows, invariance criteria, chart pullbacks.
//! * [`transfer`]: restriction of `H`, `u` to `M` and extension from `M` to its tube.
//! * [`grid`], [`hjsolver`]: uniform grids and a monotone Lax-Friedrichs solver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod hamiltonian;
pub mod hjsolver;
pub mod sampling;
pub mod tolerances;
pub mod transfer;

pub use error::{Error, Result};

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;
