// Copyright 2026 Madelung Contributors
// SPDX-License-Identifier: Apache-2.0

//! Spatial derivatives on uniform grids.
//!
//! Periodic grids are differentiated spectrally: forward FFT, multiply
//! by (ik)^order, inverse FFT. The Nyquist mode is zeroed for odd
//! orders where (ik)^order is imaginary and the result of a real input
//! must stay real. Clamped grids use second-order centered stencils
//! with one-sided second-order ends.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::Array1;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid1D};

/// Forward/inverse FFT plan pair for a given length, cached process-wide.
#[derive(Clone)]
pub struct FftPair {
    pub forward: Arc<dyn Fft<f64>>,
    pub inverse: Arc<dyn Fft<f64>>,
}

pub fn fft_pair(n: usize) -> FftPair {
    static CACHE: OnceLock<Mutex<HashMap<usize, FftPair>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut cache = cache.lock().expect("fft plan cache poisoned");
    cache
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            FftPair {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            }
        })
        .clone()
}

/// In-place spectral derivative of a complex nodal field on a periodic
/// grid. `buf` holds the field values and receives the derivative.
pub fn spectral_derivative_inplace(buf: &mut [Complex64], grid: &Grid1D, order: usize) {
    debug_assert_eq!(grid.boundary(), Boundary::Periodic);
    let n = buf.len();
    let pair = fft_pair(n);
    pair.forward.process(buf);
    let k = grid.wavenumbers();
    for (j, value) in buf.iter_mut().enumerate() {
        let ik = Complex64::new(0.0, k[j]);
        let mut factor = ik.powu(order as u32);
        // Nyquist bin: k is ambiguous in sign; odd derivatives of a real
        // field must drop it to stay real.
        if n % 2 == 0 && j == n / 2 && order % 2 == 1 {
            factor = Complex64::new(0.0, 0.0);
        }
        *value *= factor / n as f64;
    }
    pair.inverse.process(buf);
}

fn finite_difference(values: &[f64], dx: f64, order: usize) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    match order {
        1 => {
            let h2 = 2.0 * dx;
            out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / h2;
            for i in 1..n - 1 {
                out[i] = (values[i + 1] - values[i - 1]) / h2;
            }
            out[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / h2;
        }
        2 => {
            let h2 = dx * dx;
            out[0] = (2.0 * values[0] - 5.0 * values[1] + 4.0 * values[2] - values[3]) / h2;
            for i in 1..n - 1 {
                out[i] = (values[i + 1] - 2.0 * values[i] + values[i - 1]) / h2;
            }
            out[n - 1] =
                (2.0 * values[n - 1] - 5.0 * values[n - 2] + 4.0 * values[n - 3] - values[n - 4]) / h2;
        }
        _ => unreachable!("composed below"),
    }
    out
}

/// Derivative of a real nodal field.
pub fn derivative(values: &Array1<f64>, order: usize, grid: &Grid1D) -> Result<Array1<f64>> {
    if order < 1 {
        return Err(Error::invalid("derivative order must be >= 1"));
    }
    if values.len() != grid.n() {
        return Err(Error::invalid(format!(
            "field length {} does not match grid size {}",
            values.len(),
            grid.n()
        )));
    }
    match grid.boundary() {
        Boundary::Periodic => {
            let mut buf: Vec<Complex64> =
                values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            spectral_derivative_inplace(&mut buf, grid, order);
            Ok(Array1::from_iter(buf.into_iter().map(|c| c.re)))
        }
        Boundary::Clamped => {
            // Orders above 2 compose the base stencils.
            let mut current: Vec<f64> = values.to_vec();
            let mut remaining = order;
            while remaining > 0 {
                let step = if remaining >= 2 { 2 } else { 1 };
                current = finite_difference(&current, grid.dx(), step);
                remaining -= step;
            }
            Ok(Array1::from_vec(current))
        }
    }
}

/// Derivative of a complex nodal field (periodic grids only).
pub fn derivative_complex(
    values: &Array1<Complex64>,
    order: usize,
    grid: &Grid1D,
) -> Result<Array1<Complex64>> {
    if order < 1 {
        return Err(Error::invalid("derivative order must be >= 1"));
    }
    if grid.boundary() != Boundary::Periodic {
        return Err(Error::invalid("complex derivatives are spectral; grid must be periodic"));
    }
    let mut buf = values.to_vec();
    spectral_derivative_inplace(&mut buf, grid, order);
    Ok(Array1::from_vec(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn periodic_grid(n: usize) -> Grid1D {
        Grid1D::new(-4.0, 4.0, n, Boundary::Periodic).unwrap()
    }

    #[test]
    fn spectral_single_mode_is_exact() {
        let g = periodic_grid(64);
        let length = g.length();
        let f = g.nodes().mapv(|x| (2.0 * std::f64::consts::PI * x / length).sin());
        let expect = g
            .nodes()
            .mapv(|x| (2.0 * std::f64::consts::PI / length) * (2.0 * std::f64::consts::PI * x / length).cos());
        let d = derivative(&f, 1, &g).unwrap();
        for i in 0..g.n() {
            assert_abs_diff_eq!(d[i], expect[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn second_derivative_of_constant_vanishes() {
        let g = periodic_grid(32);
        let f = Array1::from_elem(32, 3.7);
        let d = derivative(&f, 2, &g).unwrap();
        for v in d.iter() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-12);
        }
        let gc = Grid1D::new(0.0, 1.0, 32, Boundary::Clamped).unwrap();
        let f = Array1::from_elem(32, 3.7);
        let d = derivative(&f, 2, &gc).unwrap();
        for v in d.iter() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn clamped_first_derivative_of_square_is_exact_inside() {
        // Centered differences are exact on quadratics in the interior.
        let g = Grid1D::new(-1.0, 1.0, 41, Boundary::Clamped).unwrap();
        let f = g.nodes().mapv(|x| x * x);
        let d = derivative(&f, 1, &g).unwrap();
        for i in 1..g.n() - 1 {
            assert_abs_diff_eq!(d[i], 2.0 * g.node(i), epsilon = 1e-12);
        }
    }

    #[test]
    fn clamped_truncation_is_second_order() {
        let err = |n: usize| {
            let g = Grid1D::new(-1.0, 1.0, n, Boundary::Clamped).unwrap();
            let f = g.nodes().mapv(|x: f64| x.powi(4));
            let d = derivative(&f, 1, &g).unwrap();
            (1..n - 1)
                .map(|i| (d[i] - 4.0 * g.node(i).powi(3)).abs())
                .fold(0.0_f64, f64::max)
        };
        let (e1, e2) = (err(41), err(81));
        let order = (e1 / e2).log2();
        assert!(order > 1.8, "observed order {order}");
    }

    #[test]
    fn rejects_zero_order_and_size_mismatch() {
        let g = periodic_grid(16);
        let f = Array1::zeros(16);
        assert!(derivative(&f, 0, &g).is_err());
        let short = Array1::zeros(8);
        assert!(derivative(&short, 1, &g).is_err());
    }

    proptest! {
        // Linearity: d(aF + bG) = a dF + b dG to machine precision.
        #[test]
        fn derivative_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, seed in 0u64..1000) {
            let g = periodic_grid(32);
            let f = g.nodes().mapv(|x| ((x + seed as f64 * 0.01).sin()));
            let h = g.nodes().mapv(|x| (0.5 * x).cos());
            let combo = &f * a + &h * b;
            let lhs = derivative(&combo, 1, &g).unwrap();
            let rhs = derivative(&f, 1, &g).unwrap() * a + derivative(&h, 1, &g).unwrap() * b;
            for i in 0..g.n() {
                prop_assert!((lhs[i] - rhs[i]).abs() < 1e-9);
            }
        }
    }
}
