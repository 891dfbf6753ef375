// Copyright 2026 Madelung Contributors
// SPDX-License-Identifier: Apache-2.0

//! Desk-scale numerical solvers for the dynamics of a quantum particle
//! coupled to a frictional, possibly thermal, environment.
//!
//! The same physical system is evolved in four pictures that can be
//! cross-validated against each other and against closed-form laws:
//!
//! * [`kostin`] — the nonlinear dissipative Schrödinger equation
//!   iħ∂ₜψ = [−ħ²∂ₓ²/2m + U + k_BT ln(ψψ*) − iħb ln(ψ/ψ*)/2m]ψ,
//!   solved by Strang splitting with spectral kinetics.
//! * [`diffusion`] — the strong-friction (Smoluchowski) limit
//!   ∂ₜρ = ∂ₓ[ρ∂ₓ(U+Q)/b + D∂ₓρ], a conservative finite-volume solver
//!   plus the closed-form and implicit dispersion laws it must reproduce.
//! * [`phasespace`] — Klein–Kramers, Wigner–Liouville, and
//!   Wigner–Klein–Kramers evolution of W(x, p) with pluggable
//!   thermo-quantum collision models.
//! * [`langevin`] — stochastic trajectory ensembles with counter-based
//!   RNG streams and an optional mean-field quantum force.
//!
//! [`qpotential`] holds the quantum potential Q = −ħ²(√ρ)″/2m√ρ and the
//! pressure-tensor identity ∂ₓP = ρ∂ₓQ shared by all pictures, and
//! [`oracle`] holds the independent reference values every solver is
//! validated against.
//!
//! All solvers work on uniform 1D grids in an arbitrary consistent unit
//! system; tests and examples use ħ = m = 1.

pub mod deriv;
pub mod diffusion;
pub mod error;
pub mod field;
pub mod grid;
pub mod kostin;
pub mod langevin;
pub mod oracle;
pub mod params;
pub(crate) mod par;
pub mod phasespace;
pub mod potential;
pub mod qpotential;

pub use error::{Error, Result};
pub use field::{DensityField, WaveFunction};
pub use grid::{Boundary, Grid1D};
pub use params::PhysicalParams;
pub use potential::PotentialSpec;
