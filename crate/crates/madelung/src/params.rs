// Copyright 2026 Madelung Contributors
// SPDX-License-Identifier: Apache-2.0

//! Physical parameters of the particle and its environment.

use crate::error::{Error, Result};

/// Particle mass m, friction coefficient b, thermal energy k_BT, and ħ.
///
/// The derived Einstein diffusion constant D = k_BT/b and the thermal
/// de Broglie length λ_T = ħ/2√(mk_BT) are exposed through fallible
/// accessors because their denominators may legitimately vanish.
/// ħ = 0 is accepted so that classical-limit runs (Einstein law,
/// Klein–Kramers fixed points, ħ-sweeps) can be expressed directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub mass: f64,
    pub friction: f64,
    pub kt: f64,
    pub hbar: f64,
}

impl PhysicalParams {
    pub fn new(mass: f64, friction: f64, kt: f64, hbar: f64) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::invalid(format!("mass must be positive, got {mass}")));
        }
        if !(hbar >= 0.0) || !hbar.is_finite() {
            return Err(Error::invalid(format!("hbar must be >= 0, got {hbar}")));
        }
        if !(friction >= 0.0) || !friction.is_finite() {
            return Err(Error::invalid(format!("friction must be >= 0, got {friction}")));
        }
        if !(kt >= 0.0) || !kt.is_finite() {
            return Err(Error::invalid(format!("thermal energy must be >= 0, got {kt}")));
        }
        Ok(Self { mass, friction, kt, hbar })
    }

    /// ħ = m = 1, frictionless, zero temperature.
    pub fn natural() -> Self {
        Self { mass: 1.0, friction: 0.0, kt: 0.0, hbar: 1.0 }
    }

    pub fn with_friction(mut self, friction: f64) -> Self {
        self.friction = friction;
        self
    }

    pub fn with_kt(mut self, kt: f64) -> Self {
        self.kt = kt;
        self
    }

    pub fn with_hbar(mut self, hbar: f64) -> Self {
        self.hbar = hbar;
        self
    }

    /// Einstein diffusion constant D = k_BT/b.
    pub fn diffusion(&self) -> Result<f64> {
        if self.friction == 0.0 {
            return Err(Error::invalid("diffusion constant D = kT/b undefined at b = 0"));
        }
        Ok(self.kt / self.friction)
    }

    /// Thermal de Broglie wavelength λ_T = ħ/2√(mk_BT).
    pub fn lambda_t(&self) -> Result<f64> {
        if self.kt == 0.0 {
            return Err(Error::invalid("thermal wavelength undefined at kT = 0"));
        }
        Ok(self.hbar / (2.0 * (self.mass * self.kt).sqrt()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn derived_quantities() {
        let p = PhysicalParams::new(1.0, 4.0, 2.0, 1.0).unwrap();
        assert_abs_diff_eq!(p.diffusion().unwrap(), 0.5);
        assert_abs_diff_eq!(p.lambda_t().unwrap(), 1.0 / (2.0 * 2.0f64.sqrt()), epsilon = 1e-15);
    }

    #[test]
    fn accessors_fail_when_denominators_vanish() {
        let p = PhysicalParams::natural();
        assert!(p.diffusion().is_err());
        assert!(p.lambda_t().is_err());
    }

    #[test]
    fn rejects_nonphysical_values() {
        assert!(PhysicalParams::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(PhysicalParams::new(1.0, -1.0, 0.0, 1.0).is_err());
        assert!(PhysicalParams::new(1.0, 0.0, -0.5, 1.0).is_err());
        assert!(PhysicalParams::new(1.0, 0.0, 0.0, -1.0).is_err());
        // ħ = 0 is the classical limit, not an error.
        assert!(PhysicalParams::new(1.0, 1.0, 1.0, 0.0).is_ok());
    }
}
