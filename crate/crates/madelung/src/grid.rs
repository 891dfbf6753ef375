// Copyright 2026 Madelung Contributors
// SPDX-License-Identifier: Apache-2.0

//! Uniform 1D spatial grids.

use ndarray::Array1;

use crate::error::{Error, Result};

/// Boundary handling for a [`Grid1D`].
///
/// Periodic grids use spectral (FFT) differentiation and rectangle-rule
/// quadrature; clamped grids use centered finite differences with
/// one-sided ends and trapezoidal quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Clamped,
}

/// A uniform grid on [x_min, x_max].
///
/// Periodic grids exclude the right endpoint (x_max ≡ x_min), so
/// dx = (x_max − x_min)/n; clamped grids include both endpoints, so
/// dx = (x_max − x_min)/(n − 1). Periodic grids require a power-of-two
/// point count for the spectral paths.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n: usize,
    boundary: Boundary,
    dx: f64,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize, boundary: Boundary) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::invalid("grid bounds must be finite"));
        }
        if x_max <= x_min {
            return Err(Error::invalid(format!(
                "grid needs x_max > x_min, got [{x_min}, {x_max}]"
            )));
        }
        if n < 8 {
            return Err(Error::invalid(format!("grid needs n >= 8, got {n}")));
        }
        if boundary == Boundary::Periodic && !n.is_power_of_two() {
            return Err(Error::invalid(format!(
                "periodic grids require a power-of-two point count for spectral paths, got {n}"
            )));
        }
        let dx = match boundary {
            Boundary::Periodic => (x_max - x_min) / n as f64,
            Boundary::Clamped => (x_max - x_min) / (n - 1) as f64,
        };
        Ok(Self { x_min, x_max, n, boundary, dx })
    }

    /// Symmetric periodic grid on [−half_width, half_width).
    pub fn symmetric_periodic(half_width: f64, n: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n, Boundary::Periodic)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Domain length x_max − x_min.
    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn node(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn nodes(&self) -> Array1<f64> {
        Array1::from_iter((0..self.n).map(|i| self.node(i)))
    }

    /// Quadrature of a nodal field over the grid.
    ///
    /// Rectangle rule on periodic grids (spectrally accurate for smooth
    /// periodic integrands), trapezoid on clamped grids.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n);
        match self.boundary {
            Boundary::Periodic => values.iter().sum::<f64>() * self.dx,
            Boundary::Clamped => {
                let inner: f64 = values[1..self.n - 1].iter().sum();
                (inner + 0.5 * (values[0] + values[self.n - 1])) * self.dx
            }
        }
    }

    /// Angular wavenumbers in FFT bin order (periodic grids only).
    ///
    /// k_j = 2π·j/L for j in 0..n/2, then the negative branch.
    pub fn wavenumbers(&self) -> Array1<f64> {
        let dk = 2.0 * std::f64::consts::PI / self.length();
        Array1::from_iter((0..self.n).map(|j| {
            let signed = if j <= self.n / 2 { j as isize } else { j as isize - self.n as isize };
            signed as f64 * dk
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn periodic_spacing_is_exact() {
        let g = Grid1D::new(-8.0, 8.0, 16, Boundary::Periodic).unwrap();
        assert_abs_diff_eq!(g.dx(), 1.0);
        assert_abs_diff_eq!(g.node(0), -8.0);
        assert_abs_diff_eq!(g.node(15), 7.0);
    }

    #[test]
    fn clamped_spacing_includes_endpoints() {
        let g = Grid1D::new(0.0, 1.0, 8, Boundary::Clamped).unwrap();
        assert_abs_diff_eq!(g.dx(), 1.0 / 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.node(7), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rejects_small_and_degenerate_grids() {
        assert!(Grid1D::new(-8.0, 8.0, 7, Boundary::Periodic).is_err());
        assert!(Grid1D::new(3.0, 3.0, 16, Boundary::Periodic).is_err());
        assert!(Grid1D::new(f64::NAN, 3.0, 16, Boundary::Clamped).is_err());
        // periodic grids must be power-of-two sized
        assert!(Grid1D::new(-1.0, 1.0, 24, Boundary::Periodic).is_err());
        assert!(Grid1D::new(-1.0, 1.0, 24, Boundary::Clamped).is_ok());
    }

    #[test]
    fn nodes_strictly_increasing() {
        let g = Grid1D::new(-2.0, 5.0, 33, Boundary::Clamped).unwrap();
        let x = g.nodes();
        for i in 1..x.len() {
            assert!(x[i] > x[i - 1]);
        }
    }

    #[test]
    fn wavenumbers_match_fft_convention() {
        let g = Grid1D::new(0.0, 2.0 * std::f64::consts::PI, 8, Boundary::Periodic).unwrap();
        let k = g.wavenumbers();
        assert_abs_diff_eq!(k[0], 0.0);
        assert_abs_diff_eq!(k[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(k[7], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(k[4], 4.0, epsilon = 1e-14);
    }

    #[test]
    fn quadrature_of_unit_function_gives_length() {
        let gp = Grid1D::new(-3.0, 5.0, 64, Boundary::Periodic).unwrap();
        let ones = vec![1.0; 64];
        assert_abs_diff_eq!(gp.integrate(&ones), 8.0, epsilon = 1e-12);
        let gc = Grid1D::new(-3.0, 5.0, 65, Boundary::Clamped).unwrap();
        let ones = vec![1.0; 65];
        assert_abs_diff_eq!(gc.integrate(&ones), 8.0, epsilon = 1e-12);
    }
}
