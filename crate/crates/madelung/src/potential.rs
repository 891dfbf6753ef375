// Copyright 2026 Madelung Contributors
// SPDX-License-Identifier: Apache-2.0

//! Polynomial external potentials with exact derivatives.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::grid::Grid1D;

/// External potential U(x) = Σ_j c_j x^j.
///
/// Polynomials keep every derivative exact, which in turn makes the
/// Moyal series in the phase-space solver terminate exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    coeffs: Vec<f64>,
}

impl PotentialSpec {
    pub fn from_coeffs(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("potential coefficients must be finite"));
        }
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Ok(Self { coeffs })
    }

    /// U ≡ 0.
    pub fn free() -> Self {
        Self { coeffs: vec![0.0] }
    }

    /// U(x) = mω₀²x²/2.
    pub fn harmonic(mass: f64, omega0: f64) -> Self {
        Self { coeffs: vec![0.0, 0.0, 0.5 * mass * omega0 * omega0] }
    }

    /// U(x) = c₄x⁴.
    pub fn quartic(c4: f64) -> Self {
        Self { coeffs: vec![0.0, 0.0, 0.0, 0.0, c4] }
    }

    /// Symmetric double well U(x) = h·((x/a)² − 1)² with minima at ±a
    /// and barrier height h at the origin.
    pub fn double_well(barrier: f64, half_separation: f64) -> Result<Self> {
        if !(barrier > 0.0) || !(half_separation > 0.0) {
            return Err(Error::invalid("double well needs positive barrier and separation"));
        }
        let a2 = half_separation * half_separation;
        Ok(Self {
            coeffs: vec![barrier, 0.0, -2.0 * barrier / a2, 0.0, barrier / (a2 * a2)],
        })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// True for potentials with at most quadratic terms (free/harmonic),
    /// for which the quantum force term of the phase-space hierarchy
    /// vanishes identically.
    pub fn is_quadratic(&self) -> bool {
        self.degree() <= 2
    }

    pub fn eval(&self, x: f64) -> f64 {
        // Horner
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// k-th derivative at x, exact; zero for k > degree.
    pub fn derivative_at(&self, x: f64, order: usize) -> f64 {
        if order > self.degree() {
            return 0.0;
        }
        // Differentiate the coefficient list `order` times, then Horner.
        let mut acc = 0.0;
        for j in (order..self.coeffs.len()).rev() {
            let mut factor = 1.0;
            for i in 0..order {
                factor *= (j - i) as f64;
            }
            acc = acc * x + self.coeffs[j] * factor;
        }
        acc
    }

    pub fn eval_on(&self, grid: &Grid1D) -> Array1<f64> {
        grid.nodes().mapv(|x| self.eval(x))
    }

    pub fn derivative_on(&self, grid: &Grid1D, order: usize) -> Array1<f64> {
        grid.nodes().mapv(|x| self.derivative_at(x, order))
    }
}
