//! Half-Laplacian phase transitions through the harmonic extension.
//!
//! The nonlocal equation `(-Δ)^{1/2} u = f(u)` on `R^n` is solved as the
//! local problem `Δv = 0` in the half-space `R^{n+1}_+ = {(x, λ): λ > 0}`
//! with the nonlinear Neumann condition `-∂_λ v = f(v)` on `λ = 0`. The crate
//! provides grids and discrete calculus, the reaction terms, extensions of
//! boundary data, a variational solver, energy accounting, `H^{1/2}` trace
//! norms and one-dimensional symmetry diagnostics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod energy;
pub mod error;
pub mod extension;
pub mod functional;
pub mod grid;
pub mod hhalf;
pub mod layer;
pub mod nonlinearity;
pub mod reduce;
pub mod solver;
pub mod symmetry;

pub use error::{Error, Result};
