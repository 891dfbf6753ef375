// Copyright 2026 Madelung Contributors
// SPDX-License-Identifier: Apache-2.0

//! Crate-wide error type.

use thiserror::Error;

/// Errors reported by grids, fields, and solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation received an argument outside its domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A field failed a normalization or positivity contract.
    #[error("normalization failure: {0}")]
    Normalization(String),

    /// The density is below the evaluation floor everywhere.
    #[error("density below floor everywhere; no support mask")]
    EmptySupport,

    /// Phase unwrapping hit a jump too large to resolve on this grid.
    #[error("phase unwrap failed at node {node}: jump {jump:.4} rad exceeds {limit:.4} rad; refine the grid")]
    PhaseUnwrap { node: usize, jump: f64, limit: f64 },

    /// An explicit step was requested beyond its stability bound.
    #[error("time step {dt:.3e} exceeds the {term} stability bound {bound:.3e}")]
    UnstableStep { dt: f64, bound: f64, term: &'static str },

    /// Negative-density clipping removed more mass than allowed.
    #[error("clipped mass {clipped:.3e} exceeds the per-step limit {limit:.3e}")]
    ExcessiveClipping { clipped: f64, limit: f64 },

    /// A field leaked into a boundary region that must stay empty.
    #[error("boundary leak: {0}")]
    BoundaryLeak(String),

    /// An iteration failed to converge.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// A numerical consistency check failed mid-run.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
