// Copyright 2026 Madelung Contributors
// SPDX-License-Identifier: Apache-2.0

//! Phase-space evolution of the quasi-distribution W(x, p).
//!
//! A single right-hand side covers the whole family
//!
//!   ∂ₜW = −(p/m)∂ₓW + Σ_k [(ħ/2i)^{2k}/(2k+1)!]·U^{(2k+1)}·∂_p^{2k+1}W
//!         + b∂_p[(p/m)W + k_BT∂_pW + X̂W],
//!
//! selected by flags: the classical Klein–Kramers equation (quantum
//! off, friction on), the Wigner–Liouville equation (quantum on,
//! friction off), and the Wigner–Klein–Kramers equation (both on) with
//! a pluggable thermo-quantum operator X̂. Potentials are polynomial,
//! so the Moyal series terminates exactly at 2k+1 ≤ deg U.
//!
//! Both directions are differentiated spectrally; p lives on a
//! periodic-extended uniform grid whose edges must stay empty (checked
//! against [`P_BOUNDARY_TOL`]). Time stepping is strong-stability RK3:
//! the spectral transport terms have purely imaginary symbols, which
//! sit inside the RK3 stability region but not the RK2 one.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::deriv;
use crate::error::{Error, Result};
use crate::field::{DensityField, WaveFunction};
use crate::grid::{Boundary, Grid1D};
use crate::par;
use crate::params::PhysicalParams;
use crate::potential::PotentialSpec;
use crate::qpotential::{self, DENSITY_FLOOR_REL};

/// Relative |W| allowed on the p-boundary rows.
pub const P_BOUNDARY_TOL: f64 = 1e-10;

/// Uniform (x, p) grid: periodic x, p ∈ [−p_max, p_max) treated as
/// periodic for spectral ∂_p.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGrid {
    x: Grid1D,
    p_max: f64,
    n_p: usize,
    dp: f64,
}

impl PhaseSpaceGrid {
    pub fn new(x: Grid1D, p_max: f64, n_p: usize) -> Result<Self> {
        if x.boundary() != Boundary::Periodic {
            return Err(Error::invalid("phase-space x-grid must be periodic"));
        }
        if !(p_max > 0.0) || n_p < 8 || !n_p.is_power_of_two() {
            return Err(Error::invalid(
                "p-grid needs p_max > 0 and a power-of-two n_p >= 8",
            ));
        }
        let dp = 2.0 * p_max / n_p as f64;
        Ok(Self { x, p_max, n_p, dp })
    }

    /// The p-grid on which the discrete Wigner transform of a ψ on
    /// `x` naturally lives: n_p = n, dp = πħ/(n·dx).
    pub fn wigner_natural(x: &Grid1D, hbar: f64) -> Result<Self> {
        let n = x.n();
        let p_max = std::f64::consts::PI * hbar / (2.0 * x.dx());
        Self::new(x.clone(), p_max, n)
    }

    pub fn x(&self) -> &Grid1D {
        &self.x
    }

    pub fn n_x(&self) -> usize {
        self.x.n()
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    pub fn dp(&self) -> f64 {
        self.dp
    }

    pub fn p_node(&self, j: usize) -> f64 {
        -self.p_max + j as f64 * self.dp
    }

    pub fn p_nodes(&self) -> Array1<f64> {
        Array1::from_iter((0..self.n_p).map(|j| self.p_node(j)))
    }

    /// Angular wavenumbers of the periodic-extended p-axis in FFT order.
    fn p_wavenumbers(&self) -> Vec<f64> {
        let dk = std::f64::consts::PI / self.p_max;
        (0..self.n_p)
            .map(|j| {
                let signed =
                    if j <= self.n_p / 2 { j as isize } else { j as isize - self.n_p as isize };
                signed as f64 * dk
            })
            .collect()
    }
}

/// Real quasi-distribution W(x_i, p_j); may be negative, but its
/// x-marginal must remain a probability density up to discretization
/// noise.
#[derive(Debug, Clone)]
pub struct WignerField {
    pub grid: PhaseSpaceGrid,
    /// Row i is x_i, contiguous over p.
    pub values: Array2<f64>,
    pub time: f64,
}

impl WignerField {
    pub fn new(grid: PhaseSpaceGrid, values: Array2<f64>, time: f64) -> Result<Self> {
        if values.shape() != [grid.n_x(), grid.n_p] {
            return Err(Error::invalid("Wigner field shape does not match grid"));
        }
        Ok(Self { grid, values, time })
    }

    pub fn total_mass(&self) -> f64 {
        self.values.sum() * self.grid.x.dx() * self.grid.dp
    }

    pub fn normalize(&mut self) -> Result<f64> {
        let mass = self.total_mass();
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::Normalization(format!("Wigner mass {mass} not positive")));
        }
        self.values.mapv_inplace(|v| v / mass);
        Ok(mass)
    }

    /// Mean kinetic energy ∬(p²/2m)W dx dp.
    pub fn kinetic_energy(&self, params: &PhysicalParams) -> f64 {
        let mut total = 0.0;
        for (i, row) in self.values.outer_iter().enumerate() {
            let _ = i;
            for (j, w) in row.iter().enumerate() {
                let p = self.grid.p_node(j);
                total += p * p * w;
            }
        }
        total * self.grid.x.dx() * self.grid.dp / (2.0 * params.mass)
    }

    /// L1 distance ∬|W − other| dx dp.
    pub fn l1_distance(&self, other: &WignerField) -> f64 {
        let mut total = 0.0;
        for (a, b) in self.values.iter().zip(other.values.iter()) {
            total += (a - b).abs();
        }
        total * self.grid.x.dx() * self.grid.dp
    }

    /// Error if |W| on the p-boundary rows exceeds
    /// [`P_BOUNDARY_TOL`]·max|W|.
    pub fn check_p_boundary(&self) -> Result<()> {
        let max = self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut edge = 0.0_f64;
        for i in 0..self.grid.n_x() {
            edge = edge.max(self.values[[i, 0]].abs());
            edge = edge.max(self.values[[i, self.grid.n_p - 1]].abs());
        }
        if edge > P_BOUNDARY_TOL * max {
            return Err(Error::BoundaryLeak(format!(
                "|W| at the p-boundary is {:.3e} of the peak",
                edge / max
            )));
        }
        Ok(())
    }
}

/// Thermo-quantum collision operator plugged into the friction bracket.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XModel {
    /// X̂ ≡ 0: the classical Klein–Kramers collision term.
    None,
    /// Semiclassical X̂ = (ħ²/12mk_BT)·U″·∂_p; needs kT > 0.
    Coffey,
    /// Density-dependent X̂ = −(ħ²/4m)·(ln ρ)″·∂_p with ρ the x-marginal;
    /// reduces to (ħ²/4mσ²)∂_p for a Gaussian marginal. Needs a
    /// nodeless marginal.
    GaussianNonlinear,
}

/// Evolution switches for [`step_phase_space`].
#[derive(Debug, Clone, Copy)]
pub struct PhaseSpaceModel {
    /// Keep the k ≥ 1 Moyal terms (quantum transport).
    pub quantum: bool,
    /// Apply the dissipative bracket b∂_p(...); needs b > 0.
    pub friction: bool,
    pub x_model: XModel,
}

impl PhaseSpaceModel {
    /// Classical Klein–Kramers evolution.
    pub fn klein_kramers() -> Self {
        Self { quantum: false, friction: true, x_model: XModel::None }
    }

    /// Frictionless Wigner–Liouville evolution.
    pub fn wigner_liouville() -> Self {
        Self { quantum: true, friction: false, x_model: XModel::None }
    }

    /// Wigner–Klein–Kramers with a chosen collision model.
    pub fn wigner_klein_kramers(x_model: XModel) -> Self {
        Self { quantum: true, friction: true, x_model }
    }
}

/// Spectral derivative along the p-axis (contiguous rows).
fn p_derivative(values: &Array2<f64>, grid: &PhaseSpaceGrid, order: usize) -> Array2<f64> {
    let n_p = grid.n_p;
    let k = grid.p_wavenumbers();
    let mut out = Array2::zeros(values.raw_dim());
    let src = values.as_slice().expect("standard layout");
    let dst = out.as_slice_mut().expect("standard layout");
    let pair = deriv::fft_pair(n_p);
    par::for_each_row_pair(dst, src, n_p, |_row, d, s| {
        let mut buf: Vec<Complex64> = s.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        pair.forward.process(&mut buf);
        for (j, v) in buf.iter_mut().enumerate() {
            let mut factor = Complex64::new(0.0, k[j]).powu(order as u32);
            if n_p % 2 == 0 && j == n_p / 2 && order % 2 == 1 {
                factor = Complex64::new(0.0, 0.0);
            }
            *v *= factor / n_p as f64;
        }
        pair.inverse.process(&mut buf);
        for (o, v) in d.iter_mut().zip(buf.iter()) {
            *o = v.re;
        }
    });
    out
}

/// Spectral ∂ₓ (columns): transpose, differentiate rows, transpose back.
fn x_derivative(values: &Array2<f64>, grid: &PhaseSpaceGrid) -> Array2<f64> {
    let transposed = values.t().to_owned().as_standard_layout().to_owned();
    let n_x = grid.n_x();
    let k: Vec<f64> = grid.x.wavenumbers().to_vec();
    let mut out_t = Array2::zeros(transposed.raw_dim());
    let src = transposed.as_slice().expect("standard layout");
    let dst = out_t.as_slice_mut().expect("standard layout");
    let pair = deriv::fft_pair(n_x);
    par::for_each_row_pair(dst, src, n_x, |_row, d, s| {
        let mut buf: Vec<Complex64> = s.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        pair.forward.process(&mut buf);
        for (j, v) in buf.iter_mut().enumerate() {
            let mut factor = Complex64::new(0.0, k[j]);
            if n_x % 2 == 0 && j == n_x / 2 {
                factor = Complex64::new(0.0, 0.0);
            }
            *v *= factor / n_x as f64;
        }
        pair.inverse.process(&mut buf);
        for (o, v) in d.iter_mut().zip(buf.iter()) {
            *o = v.re;
        }
    });
    out_t.t().to_owned().as_standard_layout().to_owned()
}

/// Coefficient (ħ/2i)^{2k}/(2k+1)! = (−1)^k (ħ/2)^{2k}/(2k+1)! of the
/// Moyal series.
fn moyal_coefficient(k: usize, hbar: f64) -> f64 {
    let mut c = 1.0_f64;
    for _ in 0..2 * k {
        c *= 0.5 * hbar;
    }
    let mut fact = 1.0_f64;
    for i in 2..=(2 * k + 1) {
        fact *= i as f64;
    }
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    sign * c / fact
}

/// Transport right-hand side
/// −(p/m)∂ₓW + Σ_k c_k·U^{(2k+1)}·∂_p^{2k+1}W, truncated exactly at
/// the polynomial degree; `quantum = false` keeps only k = 0.
pub fn moyal_rhs(
    w: &WignerField,
    pot: &PotentialSpec,
    params: &PhysicalParams,
    quantum: bool,
) -> Result<Array2<f64>> {
    let grid = &w.grid;
    let dwdx = x_derivative(&w.values, grid);
    let mut rhs = Array2::zeros(w.values.raw_dim());
    for (i, mut row) in rhs.outer_iter_mut().enumerate() {
        let _ = i;
        for (j, v) in row.iter_mut().enumerate() {
            *v = -grid.p_node(j) / params.mass * dwdx[[i, j]];
        }
    }
    let k_max = if quantum && pot.degree() >= 1 { (pot.degree() - 1) / 2 } else { 0 };
    for k in 0..=k_max {
        let order = 2 * k + 1;
        if order > pot.degree() {
            break;
        }
        let coeff = moyal_coefficient(k, params.hbar);
        if coeff == 0.0 {
            continue;
        }
        let u_deriv = pot.derivative_on(&grid.x, order);
        let dpw = p_derivative(&w.values, grid, order);
        for (i, mut row) in rhs.outer_iter_mut().enumerate() {
            let scale = coeff * u_deriv[i];
            if scale == 0.0 {
                continue;
            }
            for (j, v) in row.iter_mut().enumerate() {
                *v += scale * dpw[[i, j]];
            }
        }
    }
    Ok(rhs)
}

/// The k ≥ 1 part of the series with ∂_p^{2k} (one order lower), i.e.
/// the conditional average of the quantum force:
/// −Σ_{k≥1} c_k·U^{(2k+1)}·∂_p^{2k}W. Identically zero for free and
/// harmonic potentials.
pub fn quantum_force_term(
    w: &WignerField,
    pot: &PotentialSpec,
    params: &PhysicalParams,
) -> Result<Array2<f64>> {
    let mut out = Array2::zeros(w.values.raw_dim());
    if pot.degree() <= 2 || params.hbar == 0.0 {
        return Ok(out);
    }
    let grid = &w.grid;
    let k_max = (pot.degree() - 1) / 2;
    for k in 1..=k_max {
        let order = 2 * k + 1;
        if order > pot.degree() {
            break;
        }
        let coeff = -moyal_coefficient(k, params.hbar);
        let u_deriv = pot.derivative_on(&grid.x, order);
        let dpw = p_derivative(&w.values, grid, 2 * k);
        for (i, mut row) in out.outer_iter_mut().enumerate() {
            let scale = coeff * u_deriv[i];
            for (j, v) in row.iter_mut().enumerate() {
                *v += scale * dpw[[i, j]];
            }
        }
    }
    Ok(out)
}

/// Per-x coefficient c(x) of X̂ = c(x)·∂_p for the chosen model.
fn x_model_coefficient(
    w: &WignerField,
    x_model: XModel,
    params: &PhysicalParams,
    pot: &PotentialSpec,
) -> Result<Array1<f64>> {
    let n_x = w.grid.n_x();
    match x_model {
        XModel::None => Ok(Array1::zeros(n_x)),
        XModel::Coffey => {
            if params.kt <= 0.0 {
                return Err(Error::invalid("the Coffey model needs kT > 0"));
            }
            let scale = params.hbar * params.hbar / (12.0 * params.mass * params.kt);
            Ok(pot.derivative_on(&w.grid.x, 2).mapv(|u2| scale * u2))
        }
        XModel::GaussianNonlinear => {
            let (rho_x, _) = marginals(w)?;
            let mask = qpotential::support_mask(&rho_x, DENSITY_FLOOR_REL)?;
            let mut u = Array1::zeros(n_x);
            for i in mask.lo..=mask.hi {
                u[i] = rho_x.values()[i].ln();
            }
            qpotential::extend_flat(&mut u, mask);
            let sub = u.slice(ndarray::s![mask.lo..=mask.hi]).to_owned();
            let subgrid = Grid1D::new(
                w.grid.x.node(mask.lo),
                w.grid.x.node(mask.hi),
                mask.len(),
                Boundary::Clamped,
            )?;
            let curv = deriv::derivative(&sub, 2, &subgrid)?;
            let mut out = Array1::zeros(n_x);
            out.slice_mut(ndarray::s![mask.lo..=mask.hi]).assign(&curv);
            qpotential::extend_flat(&mut out, mask);
            let scale = -params.hbar * params.hbar / (4.0 * params.mass);
            Ok(out.mapv(|c| scale * c))
        }
    }
}

/// The field X̂W = c(x)·∂_pW inserted under b∂_p(·) in the dissipative
/// bracket.
pub fn apply_x_model(
    w: &WignerField,
    x_model: XModel,
    params: &PhysicalParams,
    pot: &PotentialSpec,
) -> Result<Array2<f64>> {
    let coeff = x_model_coefficient(w, x_model, params, pot)?;
    if coeff.iter().all(|&c| c == 0.0) {
        return Ok(Array2::zeros(w.values.raw_dim()));
    }
    let dpw = p_derivative(&w.values, &w.grid, 1);
    let mut out = dpw;
    for (i, mut row) in out.outer_iter_mut().enumerate() {
        let c = coeff[i];
        for v in row.iter_mut() {
            *v *= c;
        }
    }
    Ok(out)
}

fn full_rhs(
    w: &WignerField,
    params: &PhysicalParams,
    pot: &PotentialSpec,
    model: &PhaseSpaceModel,
) -> Result<Array2<f64>> {
    let mut rhs = moyal_rhs(w, pot, params, model.quantum)?;
    if model.friction {
        // G = (p/m)W + (kT + c_X(x))∂_pW, then rhs += b·∂_pG.
        let coeff = x_model_coefficient(w, model.x_model, params, pot)?;
        let dpw = p_derivative(&w.values, &w.grid, 1);
        let mut bracket = Array2::zeros(w.values.raw_dim());
        for i in 0..w.grid.n_x() {
            let c = params.kt + coeff[i];
            for j in 0..w.grid.n_p {
                bracket[[i, j]] =
                    w.grid.p_node(j) / params.mass * w.values[[i, j]] + c * dpw[[i, j]];
            }
        }
        let dbracket = p_derivative(&bracket, &w.grid, 1);
        rhs.zip_mut_with(&dbracket, |r, &d| *r += params.friction * d);
    }
    Ok(rhs)
}

/// Largest stable step for the active terms: transport symbols are
/// purely imaginary and must fit the RK3 imaginary-axis radius √3; the
/// momentum diffusion is real and must fit the real-axis radius ≈ 2.5.
pub fn phase_space_stable_dt(
    grid: &PhaseSpaceGrid,
    params: &PhysicalParams,
    pot: &PotentialSpec,
    model: &PhaseSpaceModel,
) -> f64 {
    let kx_max = std::f64::consts::PI / grid.x.dx();
    let kp_max = std::f64::consts::PI / grid.dp;
    let x_nodes = grid.x.nodes();

    // x-advection: (p/m)∂ₓ.
    let mut imag_rate = grid.p_max / params.mass * kx_max;
    // Moyal terms: c_k·U^{(2k+1)}·∂_p^{2k+1}.
    let k_max = if model.quantum && pot.degree() >= 1 { (pot.degree() - 1) / 2 } else { 0 };
    for k in 0..=k_max {
        let order = 2 * k + 1;
        if order > pot.degree() {
            break;
        }
        let u_max = x_nodes.iter().map(|&x| pot.derivative_at(x, order).abs()).fold(0.0, f64::max);
        imag_rate += moyal_coefficient(k, params.hbar).abs() * u_max * kp_max.powi(order as i32);
    }

    let mut real_rate: f64 = 0.0;
    if model.friction {
        // p-advection (p/m)∂_p plus the zeroth-order drag.
        imag_rate += params.friction * grid.p_max / params.mass * kp_max;
        real_rate += params.friction / params.mass;
        // Momentum diffusion b(kT + c_X)∂_p².
        let mut diff_coeff = params.kt;
        match model.x_model {
            XModel::None => {}
            XModel::Coffey => {
                if params.kt > 0.0 {
                    let u2_max = x_nodes
                        .iter()
                        .map(|&x| pot.derivative_at(x, 2).abs())
                        .fold(0.0, f64::max);
                    diff_coeff +=
                        params.hbar * params.hbar * u2_max / (12.0 * params.mass * params.kt);
                }
            }
            XModel::GaussianNonlinear => {
                // The coefficient is state-dependent; budget one thermal
                // unit of extra diffusion.
                diff_coeff += params.kt.max(params.hbar * params.hbar / (4.0 * params.mass));
            }
        }
        real_rate += params.friction * diff_coeff * kp_max * kp_max;
    }

    let safety = 0.8;
    let imag_limit = if imag_rate > 0.0 { 3.0_f64.sqrt() / imag_rate } else { f64::INFINITY };
    let real_limit = if real_rate > 0.0 { 2.5 / real_rate } else { f64::INFINITY };
    safety * imag_limit.min(real_limit)
}

/// One strong-stability RK3 step of the selected evolution; conserves
/// ∬W dx dp to rounding (all terms are exact derivatives).
pub fn step_phase_space(
    w: &WignerField,
    params: &PhysicalParams,
    pot: &PotentialSpec,
    dt: f64,
    model: &PhaseSpaceModel,
) -> Result<WignerField> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt must be > 0"));
    }
    if model.friction && params.friction <= 0.0 {
        return Err(Error::invalid("friction evolution needs b > 0"));
    }
    let bound = phase_space_stable_dt(&w.grid, params, pot, model);
    if dt > bound {
        return Err(Error::UnstableStep { dt, bound, term: "phase-space transport" });
    }

    let u0 = &w.values;
    let l0 = full_rhs(w, params, pot, model)?;
    let u1 = u0 + &(l0 * dt);
    let w1 = WignerField { grid: w.grid.clone(), values: u1, time: w.time };
    let l1 = full_rhs(&w1, params, pot, model)?;
    let u2 = u0 * 0.75 + (&w1.values + &(l1 * dt)) * 0.25;
    let w2 = WignerField { grid: w.grid.clone(), values: u2, time: w.time };
    let l2 = full_rhs(&w2, params, pot, model)?;
    let u3 = u0 / 3.0 + (&w2.values + &(l2 * dt)) * (2.0 / 3.0);
    Ok(WignerField { grid: w.grid.clone(), values: u3, time: w.time + dt })
}

/// Both marginals of W, each normalized; the x-marginal must be
/// nonnegative within −1e−8 (clamped to zero below that threshold).
pub fn marginals(w: &WignerField) -> Result<(DensityField, Array1<f64>)> {
    let dp = w.grid.dp;
    let dx = w.grid.x.dx();
    let mut rho_x = Array1::zeros(w.grid.n_x());
    let mut phi_p = Array1::zeros(w.grid.n_p);
    for (i, row) in w.values.outer_iter().enumerate() {
        let mut sum = 0.0;
        for (j, v) in row.iter().enumerate() {
            sum += v;
            phi_p[j] += v * dx;
        }
        rho_x[i] = sum * dp;
    }
    let floor = -1e-8;
    for v in rho_x.iter() {
        if *v < floor {
            return Err(Error::Normalization(format!(
                "x-marginal dips to {v:.3e}, below the quasi-distribution tolerance"
            )));
        }
    }
    let rho_x = rho_x.mapv(|v| v.max(0.0));
    let mut rho = DensityField::from_raw(w.grid.x.clone(), rho_x);
    let mass = rho.normalize()?;
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::Normalization(format!("x-marginal mass {mass} off unity beyond 1e-6")));
    }
    let p_mass: f64 = phi_p.iter().sum::<f64>() * dp;
    if (p_mass - 1.0).abs() > 1e-6 {
        return Err(Error::Normalization(format!("p-marginal mass {p_mass} off unity beyond 1e-6")));
    }
    Ok((rho, phi_p.mapv(|v| v / p_mass)))
}

/// Discrete Wigner transform of ψ on the natural p-grid:
/// W(x, p) = (1/πħ)∫ψ*(x+u)ψ(x−u)e^{2ipu/ħ}du.
///
/// The shifted product is assembled with periodic wrap and transformed
/// row-by-row. Shifts are truncated at |u| ≤ L/4: on a periodic domain
/// the correlation at u = ±L/2 wraps onto |ψ|² itself and would plant
/// a spurious oscillating ridge at the antipode of the packet; states
/// whose coherence width fits in a quarter period lose nothing. The
/// output is real up to rounding (asserted < 1e−10 relative) and its
/// x-marginal equals |ψ|² identically.
pub fn wigner_transform(psi: &WaveFunction, params: &PhysicalParams) -> Result<WignerField> {
    let grid = psi.grid().clone();
    if grid.boundary() != Boundary::Periodic {
        return Err(Error::invalid("the Wigner transform needs a periodic grid"));
    }
    let psg = PhaseSpaceGrid::wigner_natural(&grid, params.hbar)?;
    let n = grid.n();
    let v = psi.values();
    let dx = grid.dx();
    let scale = dx / (std::f64::consts::PI * params.hbar);

    let mut values = Array2::zeros((n, n));
    let flat = values.as_slice_mut().expect("standard layout");
    let pair = deriv::fft_pair(n);
    let max_imag = std::sync::atomic::AtomicU64::new(0);
    let src: Vec<Complex64> = v.to_vec();
    par::for_each_row(flat, n, |i, row| {
        let mut g: Vec<Complex64> = (0..n)
            .map(|k| {
                // signed shift index: k, or k − n on the wrapped branch
                let shift = if k <= n / 2 { k } else { n - k };
                if shift > n / 4 {
                    return Complex64::new(0.0, 0.0);
                }
                let plus = src[(i + k) % n];
                let minus = src[(i + n - k) % n];
                plus.conj() * minus
            })
            .collect();
        // e^{+2πikl/n} kernel = unnormalized inverse FFT.
        pair.inverse.process(&mut g);
        let mut row_imag = 0.0_f64;
        for (l, val) in g.iter().enumerate() {
            // l ↦ signed index, shifted to ascending p order.
            let jp = (l + n / 2) % n;
            row[jp] = scale * val.re;
            row_imag = row_imag.max(val.im.abs() * scale);
        }
        let bits = row_imag.to_bits();
        max_imag.fetch_max(bits, std::sync::atomic::Ordering::Relaxed);
    });
    let imag = f64::from_bits(max_imag.load(std::sync::atomic::Ordering::Relaxed));
    let peak = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if imag > 1e-10 * peak.max(1e-300) {
        return Err(Error::Numerical(format!(
            "Wigner transform imaginary residue {imag:.3e} exceeds threshold (grid mismatch?)"
        )));
    }
    WignerField::new(psg, values, 0.0)
}

/// Maxwell–Boltzmann equilibrium W ∝ exp(−(p²/2m + U)/k_BT) sampled on
/// the grid and normalized discretely.
pub fn maxwell_boltzmann(
    grid: &PhaseSpaceGrid,
    params: &PhysicalParams,
    pot: &PotentialSpec,
) -> Result<WignerField> {
    if params.kt <= 0.0 {
        return Err(Error::invalid("Maxwell-Boltzmann needs kT > 0"));
    }
    let mut values = Array2::zeros((grid.n_x(), grid.n_p));
    for (i, mut row) in values.outer_iter_mut().enumerate() {
        let u = pot.eval(grid.x.node(i));
        for (j, v) in row.iter_mut().enumerate() {
            let p = grid.p_node(j);
            *v = (-(p * p / (2.0 * params.mass) + u) / params.kt).exp();
        }
    }
    let mut w = WignerField::new(grid.clone(), values, 0.0)?;
    w.normalize()?;
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn xgrid(n: usize) -> Grid1D {
        Grid1D::new(-8.0, 8.0, n, Boundary::Periodic).unwrap()
    }

    // Wide enough that the correlation cutoff at L/4 sits at e^{−36}:
    // transforms are then clean through the p-boundary tolerance.
    fn wide_xgrid(n: usize) -> Grid1D {
        Grid1D::new(-12.0, 12.0, n, Boundary::Periodic).unwrap()
    }

    fn ground_state(g: &Grid1D) -> WaveFunction {
        WaveFunction::gaussian_packet(0.0, 0.5, 0.0, 1.0, 1.0, g).unwrap()
    }

    #[test]
    fn wigner_of_ground_state_is_the_gaussian() {
        // ħ=m=ω₀=1: W(x,p) = (1/π)exp(−x²−p²).
        let g = wide_xgrid(128);
        let params = PhysicalParams::natural();
        let w = wigner_transform(&ground_state(&g), &params).unwrap();
        assert_abs_diff_eq!(w.total_mass(), 1.0, epsilon = 1e-8);
        let ix = 64; // x = 0
        let jp = w.grid.n_p() / 2; // p = 0
        assert_abs_diff_eq!(w.values[[ix, jp]], 1.0 / std::f64::consts::PI, epsilon = 1e-6);
        for i in (0..g.n()).step_by(7) {
            for j in (0..w.grid.n_p()).step_by(7) {
                let x = g.node(i);
                let p = w.grid.p_node(j);
                let expect = if x * x + p * p < 16.0 {
                    (-(x * x) - p * p).exp() / std::f64::consts::PI
                } else {
                    continue;
                };
                assert_abs_diff_eq!(w.values[[i, j]], expect, epsilon = 1e-6);
            }
        }
        w.check_p_boundary().unwrap();
    }

    #[test]
    fn wigner_x_marginal_is_psi_squared() {
        let g = xgrid(128);
        let params = PhysicalParams::natural();
        let psi = WaveFunction::gaussian_packet(0.7, 0.8, 0.4, 1.0, 1.0, &g).unwrap();
        let w = wigner_transform(&psi, &params).unwrap();
        let (rho, phi_p) = marginals(&w).unwrap();
        for i in 0..g.n() {
            assert_abs_diff_eq!(rho.values()[i], psi.values()[i].norm_sqr(), epsilon = 1e-8);
        }
        // p-marginal of a drifting packet peaks at p = mv.
        let jmax = phi_p
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(j, _)| j)
            .unwrap();
        assert_abs_diff_eq!(w.grid.p_node(jmax), 0.4, epsilon = 2.0 * w.grid.dp());
    }

    #[test]
    fn cat_state_interference_goes_negative() {
        let g = xgrid(256);
        let params = PhysicalParams::natural();
        let a = WaveFunction::gaussian_packet(-2.0, 0.5, 0.0, 1.0, 1.0, &g).unwrap();
        let b = WaveFunction::gaussian_packet(2.0, 0.5, 0.0, 1.0, 1.0, &g).unwrap();
        let cat = WaveFunction::new(g.clone(), a.values() + b.values()).unwrap();
        let w = wigner_transform(&cat, &params).unwrap();
        let min = w.values.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min < -0.01, "interference fringes must be negative, min = {min}");
    }

    #[test]
    fn moyal_series_truncates_for_harmonic() {
        let g = xgrid(64);
        let params = PhysicalParams::natural();
        let pot = PotentialSpec::harmonic(1.0, 1.0);
        let w = wigner_transform(&ground_state(&g), &params).unwrap();
        let classical = moyal_rhs(&w, &pot, &params, false).unwrap();
        let quantum = moyal_rhs(&w, &pot, &params, true).unwrap();
        for (a, b) in classical.iter().zip(quantum.iter()) {
            assert_eq!(a, b, "quadratic potentials must agree bitwise");
        }
    }

    #[test]
    fn moyal_quartic_term_has_the_documented_coefficient() {
        // U = x⁴/4, ħ = 1: k = 1 contributes −(ħ²/4)·x·∂³pW.
        let g = xgrid(64);
        let params = PhysicalParams::natural();
        let pot = PotentialSpec::quartic(0.25);
        let w = wigner_transform(&ground_state(&g), &params).unwrap();
        let classical = moyal_rhs(&w, &pot, &params, false).unwrap();
        let quantum = moyal_rhs(&w, &pot, &params, true).unwrap();
        let d3 = p_derivative(&w.values, &w.grid, 3);
        for i in (4..60).step_by(5) {
            let x = g.node(i);
            for j in (4..60).step_by(5) {
                let expect = -0.25 * x * d3[[i, j]];
                let got = quantum[[i, j]] - classical[[i, j]];
                assert_abs_diff_eq!(got, expect, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn free_particle_rhs_is_pure_advection() {
        let g = xgrid(64);
        let params = PhysicalParams::natural();
        let pot = PotentialSpec::free();
        let w = wigner_transform(&ground_state(&g), &params).unwrap();
        let rhs = moyal_rhs(&w, &pot, &params, true).unwrap();
        let dwdx = x_derivative(&w.values, &w.grid);
        for i in 0..g.n() {
            for j in 0..w.grid.n_p() {
                let expect = -w.grid.p_node(j) * dwdx[[i, j]];
                assert_abs_diff_eq!(rhs[[i, j]], expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn quantum_force_term_vanishes_for_quadratic_potentials() {
        let g = xgrid(64);
        let params = PhysicalParams::natural();
        let w = wigner_transform(&ground_state(&g), &params).unwrap();
        for pot in [PotentialSpec::free(), PotentialSpec::harmonic(1.0, 1.0)] {
            let term = quantum_force_term(&w, &pot, &params).unwrap();
            assert!(term.iter().all(|&v| v == 0.0));
        }
        // ħ → 0 kills it for any potential.
        let classical = PhysicalParams::new(1.0, 0.0, 0.0, 0.0).unwrap();
        let term = quantum_force_term(&w, &PotentialSpec::quartic(0.25), &classical).unwrap();
        assert!(term.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn quantum_force_quartic_coefficient_and_zero_mean_work() {
        let g = wide_xgrid(128);
        let params = PhysicalParams::natural();
        let pot = PotentialSpec::quartic(0.25);
        let psi = WaveFunction::gaussian_packet(0.6, 0.5, 0.0, 1.0, 1.0, &g).unwrap();
        let w = wigner_transform(&psi, &params).unwrap();
        let term = quantum_force_term(&w, &pot, &params).unwrap();
        // +(ħ²/4)x∂²pW pointwise.
        let d2 = p_derivative(&w.values, &w.grid, 2);
        for i in (8..120).step_by(9) {
            for j in (8..120).step_by(9) {
                let expect = 0.25 * g.node(i) * d2[[i, j]];
                assert_abs_diff_eq!(term[[i, j]], expect, epsilon = 1e-9);
            }
        }
        // ∬ p·term dx dp = 0: the quantum force does no net work.
        let mut work = 0.0;
        for i in 0..g.n() {
            for j in 0..w.grid.n_p() {
                work += w.grid.p_node(j) * term[[i, j]];
            }
        }
        work *= g.dx() * w.grid.dp();
        assert_abs_diff_eq!(work, 0.0, epsilon = 1e-8);
    }

    #[test]
    fn x_model_coefficients() {
        let g = xgrid(64);
        let pot = PotentialSpec::harmonic(1.0, 1.0);
        let params = PhysicalParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let w = maxwell_boltzmann(
            &PhaseSpaceGrid::new(g.clone(), 8.0, 64).unwrap(),
            &params,
            &pot,
        )
        .unwrap();
        // Coffey: (ħ²/12mkT)·U″ = 1/12.
        let coeff = x_model_coefficient(&w, XModel::Coffey, &params, &pot).unwrap();
        for c in coeff.iter() {
            assert_abs_diff_eq!(*c, 1.0 / 12.0, epsilon = 1e-12);
        }
        // Gaussian marginal with σ² = kT/mω₀² = 1 → ħ²/4mσ² = 0.25.
        let coeff =
            x_model_coefficient(&w, XModel::GaussianNonlinear, &params, &pot).unwrap();
        let mid = g.n() / 2;
        assert_abs_diff_eq!(coeff[mid], 0.25, epsilon = 1e-4);
        // X̂W field is the coefficient times ∂_pW.
        let field = apply_x_model(&w, XModel::Coffey, &params, &pot).unwrap();
        let dpw = p_derivative(&w.values, &w.grid, 1);
        for (a, b) in field.iter().zip(dpw.iter()) {
            assert_abs_diff_eq!(*a, b / 12.0, epsilon = 1e-12);
        }
        // Variant none contributes nothing.
        let zero = apply_x_model(&w, XModel::None, &params, &pot).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        // Coffey at kT = 0 violates its precondition.
        let cold = PhysicalParams::natural().with_friction(1.0);
        assert!(x_model_coefficient(&w, XModel::Coffey, &cold, &pot).is_err());
    }

    #[test]
    fn maxwell_boltzmann_is_a_klein_kramers_fixed_point() {
        let g = xgrid(128);
        let pot = PotentialSpec::harmonic(1.0, 1.0);
        let params = PhysicalParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let psg = PhaseSpaceGrid::new(g, 8.0, 128).unwrap();
        let w = maxwell_boltzmann(&psg, &params, &pot).unwrap();
        // The discrete rhs annihilates the sampled MB state.
        let model = PhaseSpaceModel::klein_kramers();
        let rhs = full_rhs(&w, &params, &pot, &model).unwrap();
        let peak = w.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let residual = rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / peak;
        assert!(residual < 1e-10, "MB residual {residual:.3e}");
        // And stepping holds it: ‖ΔW‖₁ < 1e−5 over 10³ steps.
        let dt = 0.9 * phase_space_stable_dt(&psg_of(&w), &params, &pot, &model);
        let mut evolved = w.clone();
        for _ in 0..1000 {
            evolved = step_phase_space(&evolved, &params, &pot, dt, &model).unwrap();
        }
        let drift = evolved.l1_distance(&w);
        assert!(drift < 1e-5, "MB drift {drift:.3e} over 1000 steps");
        assert_abs_diff_eq!(evolved.total_mass(), 1.0, epsilon = 1e-10);
    }

    fn psg_of(w: &WignerField) -> PhaseSpaceGrid {
        w.grid.clone()
    }

    #[test]
    fn ground_state_wigner_is_stationary_without_friction() {
        let g = wide_xgrid(128);
        let params = PhysicalParams::natural();
        let pot = PotentialSpec::harmonic(1.0, 1.0);
        let w0 = wigner_transform(&ground_state(&g), &params).unwrap();
        let model = PhaseSpaceModel::wigner_liouville();
        let dt = 0.9 * phase_space_stable_dt(&w0.grid, &params, &pot, &model);
        let mut w = w0.clone();
        for _ in 0..500 {
            w = step_phase_space(&w, &params, &pot, dt, &model).unwrap();
        }
        let drift = w.l1_distance(&w0);
        assert!(drift < 1e-6, "ground-state drift {drift:.3e}");
        w.check_p_boundary().unwrap();
    }

    #[test]
    fn friction_dissipates_kinetic_energy_at_zero_temperature() {
        let g = wide_xgrid(64);
        let params = PhysicalParams::new(1.0, 1.0, 0.0, 1.0).unwrap();
        let pot = PotentialSpec::harmonic(1.0, 1.0);
        let psi = WaveFunction::gaussian_packet(0.0, 0.5, 0.8, 1.0, 1.0, &g).unwrap();
        let w0 = wigner_transform(&psi, &params).unwrap();
        let model = PhaseSpaceModel::wigner_klein_kramers(XModel::None);
        let dt = 0.9 * phase_space_stable_dt(&w0.grid, &params, &pot, &model);
        let mut w = w0.clone();
        let mut last = w.kinetic_energy(&params);
        let e0 = last;
        for _ in 0..10 {
            for _ in 0..40 {
                w = step_phase_space(&w, &params, &pot, dt, &model).unwrap();
            }
            let now = w.kinetic_energy(&params);
            assert!(now <= last + 1e-12, "kinetic energy rose: {last} -> {now}");
            last = now;
        }
        assert!(last < e0, "no dissipation observed");
    }

    #[test]
    fn unstable_step_and_boundary_leak_are_rejected() {
        let g = xgrid(64);
        let params = PhysicalParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let pot = PotentialSpec::harmonic(1.0, 1.0);
        let psg = PhaseSpaceGrid::new(g, 8.0, 64).unwrap();
        let w = maxwell_boltzmann(&psg, &params, &pot).unwrap();
        let model = PhaseSpaceModel::klein_kramers();
        let bound = phase_space_stable_dt(&psg, &params, &pot, &model);
        assert!(matches!(
            step_phase_space(&w, &params, &pot, 3.0 * bound, &model),
            Err(Error::UnstableStep { .. })
        ));
        // A p_max too small for the thermal width leaks at the boundary.
        let tight = PhaseSpaceGrid::new(xgrid(64), 2.5, 64).unwrap();
        let w = maxwell_boltzmann(&tight, &params, &pot).unwrap();
        assert!(w.check_p_boundary().is_err());
    }
}
