//! Variational solver and verification workbench for hylomorphic solitons
//! and vortices of the nonlinear Schrödinger (NSE) and nonlinear
//! Klein–Gordon (NKG) equations.
//!
//! Ground states are found by minimizing `J_δ = E/|C| + δ(E + 2a|C|^s)`
//! over discretized fields ([`minimize`]), the hylomorphy condition is
//! checked with explicit test functions ([`hylomorphy`]), and minimizers are
//! evolved under the Hamiltonian flow to probe orbital stability
//! ([`evolve`]). [`verify`] turns the structural hypotheses on the
//! functionals into numerical properties. [`workflows`] strings these
//! together for the `hylomorph` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod evolve;
pub mod functionals;
pub mod grid;
pub mod hylomorphy;
pub mod io;
pub mod minimize;
pub mod model;
pub mod sampling;
pub mod spectral;
pub mod state;
pub mod verify;
pub mod workflows;

pub use error::{Error, Result};
