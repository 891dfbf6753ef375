// Copyright 2026 Madelung Contributors
// SPDX-License-Identifier: Apache-2.0

//! Probability densities and wave functions on a grid.

use ndarray::Array1;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid1D;

/// Construction tolerance on ∫ρ dx = 1 and ∫|ψ|² dx = 1.
pub const NORM_TOL: f64 = 1e-8;

/// Relative density allowed at the grid edge before a sampled state is
/// considered truncated.
pub const BOUNDARY_TRUNCATION_TOL: f64 = 1e-12;

/// Real probability density ρ(x) ≥ 0 with unit mass.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: Grid1D,
    values: Array1<f64>,
}

impl DensityField {
    /// Wrap nodal values, requiring nonnegativity, and normalize.
    pub fn new(grid: Grid1D, values: Array1<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::invalid("density length does not match grid"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Normalization(
                "density values must be finite and nonnegative".into(),
            ));
        }
        let mut field = Self { grid, values };
        field.normalize()?;
        Ok(field)
    }

    /// Normalized Gaussian sampled on the grid.
    ///
    /// Fails if the grid truncates the tails above
    /// [`BOUNDARY_TRUNCATION_TOL`] relative to the peak.
    pub fn gaussian(mean: f64, variance: f64, grid: &Grid1D) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(Error::invalid(format!("gaussian variance must be > 0, got {variance}")));
        }
        let norm = 1.0 / (2.0 * std::f64::consts::PI * variance).sqrt();
        let values = grid
            .nodes()
            .mapv(|x| norm * (-(x - mean) * (x - mean) / (2.0 * variance)).exp());
        let peak = values.iter().cloned().fold(0.0_f64, f64::max);
        let edge = values[0].max(values[values.len() - 1]);
        if edge > BOUNDARY_TRUNCATION_TOL * peak {
            return Err(Error::BoundaryLeak(format!(
                "gaussian(mean={mean}, var={variance}) truncated at the grid edge: \
                 edge/peak = {:.3e}",
                edge / peak
            )));
        }
        Self::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    /// Mutable nodal values. Callers must restore normalization.
    pub(crate) fn values_mut(&mut self) -> &mut Array1<f64> {
        &mut self.values
    }

    pub(crate) fn from_raw(grid: Grid1D, values: Array1<f64>) -> Self {
        Self { grid, values }
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(self.values.as_slice().unwrap())
    }

    /// Rescale to unit mass; returns the mass before normalization.
    pub fn normalize(&mut self) -> Result<f64> {
        let mass = self.mass();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::Normalization(format!("total mass {mass} is not positive")));
        }
        self.values.mapv_inplace(|v| v / mass);
        Ok(mass)
    }

    /// Mean and variance by grid quadrature.
    ///
    /// Requires the field to be normalized within 1e−6.
    pub fn moments(&self) -> Result<(f64, f64)> {
        let mass = self.mass();
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::Normalization(format!(
                "moments need a normalized density; mass = {mass}"
            )));
        }
        let nodes = self.grid.nodes();
        let weighted: Vec<f64> =
            nodes.iter().zip(self.values.iter()).map(|(&x, &r)| x * r).collect();
        let mean = self.grid.integrate(&weighted) / mass;
        let centered: Vec<f64> = nodes
            .iter()
            .zip(self.values.iter())
            .map(|(&x, &r)| (x - mean) * (x - mean) * r)
            .collect();
        let variance = self.grid.integrate(&centered) / mass;
        Ok((mean, variance))
    }
}

/// Complex wave function ψ(x) with ∫|ψ|² dx = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: Grid1D,
    values: Array1<Complex64>,
}

impl WaveFunction {
    pub fn new(grid: Grid1D, values: Array1<Complex64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::invalid("wave function length does not match grid"));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Normalization("wave function values must be finite".into()));
        }
        let mut psi = Self { grid, values };
        psi.normalize()?;
        Ok(psi)
    }

    /// Gaussian packet centered at `mean` with position variance
    /// `variance` (of |ψ|²) and mean velocity `velocity`:
    /// ψ ∝ exp(−(x−x̄)²/4σ²)·exp(imv(x−x̄)/ħ).
    pub fn gaussian_packet(
        mean: f64,
        variance: f64,
        velocity: f64,
        mass: f64,
        hbar: f64,
        grid: &Grid1D,
    ) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(Error::invalid("packet variance must be > 0"));
        }
        let values = grid.nodes().mapv(|x| {
            let dxm = x - mean;
            let amp = (-dxm * dxm / (4.0 * variance)).exp();
            let phase = mass * velocity * dxm / hbar;
            Complex64::from_polar(amp, phase)
        });
        let peak = values.iter().map(|v| v.norm_sqr()).fold(0.0_f64, f64::max);
        let edge = values[0].norm_sqr().max(values[values.len() - 1].norm_sqr());
        if edge > BOUNDARY_TRUNCATION_TOL * peak {
            return Err(Error::BoundaryLeak(format!(
                "gaussian packet truncated at the grid edge: edge/peak = {:.3e}",
                edge / peak
            )));
        }
        Self::new(grid.clone(), values)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn values(&self) -> &Array1<Complex64> {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut Array1<Complex64> {
        &mut self.values
    }

    pub(crate) fn from_raw(grid: Grid1D, values: Array1<Complex64>) -> Self {
        Self { grid, values }
    }

    pub fn norm_sqr_integral(&self) -> f64 {
        let abs2: Vec<f64> = self.values.iter().map(|v| v.norm_sqr()).collect();
        self.grid.integrate(&abs2)
    }

    /// Rescale to unit norm; returns ∫|ψ|²dx before normalization.
    pub fn normalize(&mut self) -> Result<f64> {
        let mass = self.norm_sqr_integral();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::Normalization(format!("wave function norm² {mass} is not positive")));
        }
        let scale = 1.0 / mass.sqrt();
        self.values.mapv_inplace(|v| v * scale);
        Ok(mass)
    }

    /// |ψ|² as a (non-renormalized) density; unit mass to solver
    /// tolerance whenever ψ is normalized.
    pub fn density(&self) -> DensityField {
        DensityField::from_raw(self.grid.clone(), self.values.mapv(|v| v.norm_sqr()))
    }
}
