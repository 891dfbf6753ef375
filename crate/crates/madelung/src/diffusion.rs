// Copyright 2026 Madelung Contributors
// SPDX-License-Identifier: Apache-2.0

//! Strong-friction solvers and dispersion laws.
//!
//! The thermo-quantum diffusion equation
//!
//!   ∂ₜρ = ∂ₓ[ρ∂ₓ(U + Q)/b + D∂ₓρ],   D = k_BT/b,
//!
//! is advanced by an explicit conservative finite-volume step; the
//! purely quantum equation is its kT = 0 case (one code path). For
//! Gaussian states in free or harmonic potentials the second moment
//! closes exactly:
//!
//!   dσ²/dt = −2mω₀²σ²/b + ħ²/(2mbσ²) + 2D,
//!
//! whose solutions are the closed-form harmonic dispersion
//! σ² = (ħ/2mω₀)√(1 − e^{−4mω₀²t/b}) and, for ω₀ = 0, the implicit law
//! σ² − λ_T² ln(1 + σ²/λ_T²) = 2Dt.
//!
//! The nonlinear variant integrates the drift over inverse temperature,
//! ∂ₜρ = D∂ₓ[ρ∂ₓ∫₀^β(U+Q) dβ′ + ∂ₓρ], with Q under the integral
//! evaluated on a Gaussian equilibrium surrogate family (see
//! [`step_nonlinear_smoluchowski`]).

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::field::DensityField;
use crate::grid::Boundary;
use crate::params::PhysicalParams;
use crate::potential::PotentialSpec;
use crate::qpotential;

/// Safety factor in the quantum (fourth-order) stability bound
/// dt ≤ C·dx⁴·2mb/ħ². The von Neumann limit of the linearized
/// biharmonic term sits at C = 0.25.
pub const QUANTUM_CFL: f64 = 0.1;

/// Per-step limit on mass removed by clipping negative values.
pub const CLIP_LIMIT: f64 = 1e-10;

/// Relative density below which drift fluxes are frozen.
///
/// Around a steep exponential tail with log-slope c = |ρ′/ρ| the
/// quantum drift linearizes to ∂ₜδρ ∝ (c²∂ₓ² − ∂ₓ⁴)δρ, which grows
/// sawtooth perturbations wherever modes with k < c fit inside the
/// tail. Those wavelengths only fit where the density spans many
/// decades below the peak; freezing the drift there removes the
/// unstable band at a σ²-budget cost below 1e−3 relative. Diffusion
/// stays active on every face.
pub const DRIFT_FLOOR_REL: f64 = 1e-5;

/// σ²(t) samples with their provenance.
#[derive(Debug, Clone)]
pub struct DispersionSeries {
    pub times: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub source: SeriesSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesSource {
    Pde,
    Ode,
    ClosedForm,
    Implicit,
}

impl SeriesSource {
    pub fn label(&self) -> &'static str {
        match self {
            SeriesSource::Pde => "pde",
            SeriesSource::Ode => "ode",
            SeriesSource::ClosedForm => "closed-form",
            SeriesSource::Implicit => "implicit",
        }
    }
}

/// Explicit stability bound for [`step_smoluchowski`]: the minimum of
/// the quantum fourth-order bound C·dx⁴·2mb/ħ², the thermal diffusion
/// bound dx²/4D, and a drift CFL dx·b/2·max|U′|.
pub fn smoluchowski_stable_dt(
    rho: &DensityField,
    params: &PhysicalParams,
    pot: &PotentialSpec,
) -> Result<f64> {
    if params.friction <= 0.0 {
        return Err(Error::invalid("the strong-friction solver needs b > 0"));
    }
    let dx = rho.grid().dx();
    let mut bound = f64::INFINITY;
    if params.hbar > 0.0 {
        bound = bound.min(
            QUANTUM_CFL * dx.powi(4) * 2.0 * params.mass * params.friction
                / (params.hbar * params.hbar),
        );
    }
    if params.kt > 0.0 {
        bound = bound.min(0.25 * dx * dx / params.diffusion()?);
    }
    let max_slope = rho
        .grid()
        .nodes()
        .iter()
        .map(|&x| pot.derivative_at(x, 1).abs())
        .fold(0.0_f64, f64::max);
    if max_slope > 0.0 {
        bound = bound.min(0.5 * dx * params.friction / max_slope);
    }
    Ok(bound)
}

/// One conservative finite-volume step of
/// ∂ₜρ = ∂ₓ[ρ∂ₓμ_drift/b + D∂ₓρ] for an arbitrary nodal drift
/// potential μ_drift. Shared by the plain and nonlinear solvers.
fn conservative_step(
    rho: &DensityField,
    drift: &Array1<f64>,
    params: &PhysicalParams,
    dt: f64,
) -> Result<DensityField> {
    let grid = rho.grid();
    let n = grid.n();
    let dx = grid.dx();
    let inv_b = 1.0 / params.friction;
    let diffusion = if params.kt > 0.0 { params.diffusion()? } else { 0.0 };
    let v = rho.values();
    let peak = v.iter().cloned().fold(0.0_f64, f64::max);
    let drift_floor = DRIFT_FLOOR_REL * peak;

    // G_{i+1/2} = ρ_face·(μ_{i+1}−μ_i)/dx/b + D·(ρ_{i+1}−ρ_i)/dx,
    // with ρ ← ρ + dt·(G_{i+1/2} − G_{i−1/2})/dx. Face fluxes telescope,
    // so mass is conserved to rounding; clamped grids use no-flux ends.
    let face = |i: usize, j: usize| -> f64 {
        let drho = (v[j] - v[i]) / dx;
        let mut flux = diffusion * drho;
        if v[i] > drift_floor && v[j] > drift_floor {
            let dmu = (drift[j] - drift[i]) / dx;
            flux += 0.5 * (v[i] + v[j]) * dmu * inv_b;
        }
        flux
    };

    let mut fluxes = vec![0.0_f64; n + 1]; // face f between i-1 and i at index i
    match grid.boundary() {
        Boundary::Periodic => {
            for i in 0..n {
                let j = (i + 1) % n;
                fluxes[i + 1] = face(i, j);
            }
            fluxes[0] = fluxes[n];
        }
        Boundary::Clamped => {
            for i in 0..n - 1 {
                fluxes[i + 1] = face(i, i + 1);
            }
            // no-flux boundaries: fluxes[0] = fluxes[n] = 0
        }
    }

    let mut new_values = Array1::zeros(n);
    for i in 0..n {
        new_values[i] = v[i] + dt * (fluxes[i + 1] - fluxes[i]) / dx;
    }

    // Clip rounding-level negative values and account for the removed mass.
    let mut clipped = 0.0;
    for value in new_values.iter_mut() {
        if *value < 0.0 {
            clipped += -*value * dx;
            *value = 0.0;
        }
    }
    if clipped > CLIP_LIMIT {
        return Err(Error::ExcessiveClipping { clipped, limit: CLIP_LIMIT });
    }
    let mut out = DensityField::from_raw(grid.clone(), new_values);
    if clipped > 0.0 {
        out.normalize()?;
    }
    Ok(out)
}

/// One explicit step of the (thermo-)quantum diffusion equation.
pub fn step_smoluchowski(
    rho: &DensityField,
    params: &PhysicalParams,
    pot: &PotentialSpec,
    dt: f64,
) -> Result<DensityField> {
    let bound = smoluchowski_stable_dt(rho, params, pot)?;
    if dt > bound {
        return Err(Error::UnstableStep { dt, bound, term: "quantum drift" });
    }
    let mut drift = pot.eval_on(rho.grid());
    if params.hbar > 0.0 {
        let q = qpotential::quantum_potential(rho, params)?;
        drift += &q;
    }
    conservative_step(rho, &drift, params, dt)
}

/// Evolution options for [`evolve_smoluchowski`].
#[derive(Debug, Clone, Copy)]
pub struct SmoluchowskiOptions {
    pub t_max: f64,
    /// Step size; use [`smoluchowski_stable_dt`] scaled by ≤ 1 or pass
    /// `None` to take the stability bound directly.
    pub dt: Option<f64>,
    /// Number of evenly spaced σ² checkpoints (besides t = 0).
    pub checkpoints: usize,
}

/// Drive the conservative solver and record σ²(t).
pub fn evolve_smoluchowski(
    rho0: &DensityField,
    params: &PhysicalParams,
    pot: &PotentialSpec,
    opts: SmoluchowskiOptions,
) -> Result<(DispersionSeries, DensityField)> {
    if !(opts.t_max > 0.0) || opts.checkpoints == 0 {
        return Err(Error::invalid("t_max must be positive and checkpoints >= 1"));
    }
    let bound = smoluchowski_stable_dt(rho0, params, pot)?;
    let dt = match opts.dt {
        Some(dt) if dt > bound => return Err(Error::UnstableStep { dt, bound, term: "quantum drift" }),
        Some(dt) => dt,
        None => bound,
    };
    let steps_total = (opts.t_max / dt).ceil() as usize;
    let record_every = (steps_total / opts.checkpoints).max(1);

    let mut rho = rho0.clone();
    let (_, var0) = rho.moments()?;
    let mut series =
        DispersionSeries { times: vec![0.0], sigma2: vec![var0], source: SeriesSource::Pde };
    let u = pot.eval_on(rho.grid());
    let mut drift = u.clone();
    for s in 1..=steps_total {
        if params.hbar > 0.0 {
            let q = qpotential::quantum_potential(&rho, params)?;
            drift.assign(&u);
            drift += &q;
        }
        rho = conservative_step(&rho, &drift, params, dt)?;
        if s % record_every == 0 || s == steps_total {
            let (_, var) = rho.moments()?;
            series.times.push(s as f64 * dt);
            series.sigma2.push(var);
        }
    }
    Ok((series, rho))
}

/// Second-moment closure of the diffusion equation under the Gaussian
/// ansatz: dσ²/dt = −2mω₀²σ²/b + ħ²/(2mbσ²) + 2D. Only free or
/// harmonic potentials keep the ansatz closed.
pub fn gaussian_sigma_ode_rhs(
    sigma2: f64,
    params: &PhysicalParams,
    pot: &PotentialSpec,
) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::invalid("sigma^2 must be > 0"));
    }
    if params.friction <= 0.0 {
        return Err(Error::invalid("the moment ODE needs b > 0"));
    }
    if !pot.is_quadratic() {
        return Err(Error::invalid("the Gaussian closure needs a free or harmonic potential"));
    }
    let omega_sq = pot.derivative_at(0.0, 2) / params.mass;
    let m = params.mass;
    let b = params.friction;
    let h2 = params.hbar * params.hbar;
    let two_d = 2.0 * params.kt / b;
    Ok(-2.0 * m * omega_sq * sigma2 / b + h2 / (2.0 * m * b * sigma2) + two_d)
}

/// Closed-form harmonic dispersion σ²(t) = (ħ/2mω₀)√(1 − e^{−4mω₀²t/b}).
pub fn dispersion_harmonic(t: f64, params: &PhysicalParams, omega0: f64) -> Result<f64> {
    if !(omega0 > 0.0) || params.friction <= 0.0 || t < 0.0 {
        return Err(Error::invalid("harmonic dispersion needs omega0 > 0, b > 0, t >= 0"));
    }
    let m = params.mass;
    let b = params.friction;
    Ok(params.hbar / (2.0 * m * omega0)
        * (1.0 - (-4.0 * m * omega0 * omega0 * t / b).exp()).sqrt())
}

/// Free thermo-quantum dispersion: solve
/// σ² − λ_T² ln(1 + σ²/λ_T²) = 2Dt by Newton iteration.
///
/// f′(x) = x/(x + λ_T²) > 0, so the iteration is monotone-safe; the
/// initial guess 2Dt + ħ√(t/mb) overshoots from the classical side.
pub fn dispersion_free_implicit(t: f64, params: &PhysicalParams) -> Result<f64> {
    if params.kt <= 0.0 || params.friction <= 0.0 || t < 0.0 {
        return Err(Error::invalid("implicit dispersion needs kT > 0, b > 0, t >= 0"));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let two_dt = 2.0 * params.diffusion()? * t;
    let lambda2 = {
        let l = params.lambda_t()?;
        l * l
    };
    if lambda2 == 0.0 {
        return Ok(two_dt);
    }
    let f = |x: f64| x - lambda2 * (x / lambda2).ln_1p() - two_dt;
    let fp = |x: f64| x / (x + lambda2);
    let tol = 1e-12 * two_dt.max(1.0);
    let mut x = two_dt + params.hbar * (t / (params.mass * params.friction)).sqrt();
    for _ in 0..100 {
        let fx = f(x);
        if fx.abs() < tol {
            return Ok(x);
        }
        let step = fx / fp(x);
        x -= step;
        if x <= 0.0 {
            x = tol; // monotonicity keeps the root positive
        }
    }
    Err(Error::NoConvergence(format!("implicit dispersion law at t = {t}")))
}

/// Gaussian-surrogate equilibrium variance at thermal energy `kt`:
/// the positive root of −2mω₀²σ⁴ + 2(kT/b)·bσ² + ħ²/2m = 0, i.e. the
/// stationary point of the moment ODE at that temperature.
fn surrogate_equilibrium_sigma2(kt: f64, params: &PhysicalParams, omega_sq: f64) -> f64 {
    let m = params.mass;
    let classical = kt / (m * omega_sq);
    let quantum = params.hbar * params.hbar / (m * m * omega_sq);
    0.5 * (classical + (classical * classical + quantum).sqrt())
}

/// One step of the nonlinear quantum Smoluchowski equation
/// ∂ₜρ = D∂ₓ[ρ∂ₓ∫₀^β(U+Q) dβ′ + ∂ₓρ].
///
/// The integrand's quantum part at intermediate inverse temperature β′
/// is evaluated on a Gaussian surrogate whose variance is the
/// equilibrium of the moment ODE at that temperature, centered at the
/// well minimum; the β′ = 0 node contributes nothing (σ² → ∞, Q → 0).
/// With `beta_nodes = 1` the quadrature collapses to Q of the current
/// density and the step is identical to [`step_smoluchowski`].
pub fn step_nonlinear_smoluchowski(
    rho: &DensityField,
    params: &PhysicalParams,
    pot: &PotentialSpec,
    dt: f64,
    beta_nodes: usize,
) -> Result<DensityField> {
    if beta_nodes == 0 {
        return Err(Error::invalid("beta_nodes must be >= 1"));
    }
    if beta_nodes == 1 {
        return step_smoluchowski(rho, params, pot, dt);
    }
    if params.kt <= 0.0 {
        return Err(Error::invalid("the beta quadrature needs kT > 0"));
    }
    let curvature = pot.derivative_at(0.0, 2);
    if params.hbar > 0.0 && (pot.degree() != 2 || curvature <= 0.0) {
        return Err(Error::invalid(
            "the Gaussian surrogate family needs a harmonic potential (or hbar = 0)",
        ));
    }

    let bound = smoluchowski_stable_dt(rho, params, pot)?;
    if dt > bound {
        return Err(Error::UnstableStep { dt, bound, term: "quantum drift" });
    }

    let grid = rho.grid();
    let mut drift = pot.eval_on(grid);
    if params.hbar > 0.0 {
        let omega_sq = curvature / params.mass;
        let center = -pot.derivative_at(0.0, 1) / curvature; // parabola vertex
        let beta = 1.0 / params.kt;
        // Trapezoid over β′ ∈ [0, β]; Q(β′ = 0) ≡ 0.
        let h = beta / (beta_nodes - 1) as f64;
        let mut q_integral = Array1::<f64>::zeros(grid.n());
        for j in 1..beta_nodes {
            let beta_j = j as f64 * h;
            let weight = if j == beta_nodes - 1 { 0.5 * h } else { h };
            let s2 = surrogate_equilibrium_sigma2(1.0 / beta_j, params, omega_sq);
            let h2 = params.hbar * params.hbar;
            let a = h2 / (4.0 * params.mass * s2);
            let c = h2 / (8.0 * params.mass * s2 * s2);
            for (i, x) in grid.nodes().iter().enumerate() {
                let d = x - center;
                q_integral[i] += weight * (a - c * d * d);
            }
        }
        drift.zip_mut_with(&q_integral, |w, &qi| *w += params.kt * qi);
    }
    conservative_step(rho, &drift, params, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid1D;
    use crate::oracle;
    use approx::assert_abs_diff_eq;

    fn natural_with_friction() -> PhysicalParams {
        PhysicalParams::new(1.0, 1.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn ode_rhs_matches_hand_derived_values() {
        // ħ=m=b=ω₀=1, σ²=0.25, D=0 → −0.5 + 2 = 1.5
        let params = natural_with_friction();
        let pot = PotentialSpec::harmonic(1.0, 1.0);
        assert_abs_diff_eq!(gaussian_sigma_ode_rhs(0.25, &params, &pot).unwrap(), 1.5);
        // stationary at the ground-state width σ² = ħ/2mω₀
        assert_abs_diff_eq!(gaussian_sigma_ode_rhs(0.5, &params, &pot).unwrap(), 0.0);
        // ω₀=0, ħ=m=b=1, D=1, σ²=1 → 0.5 + 2 = 2.5
        let warm = PhysicalParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(
            gaussian_sigma_ode_rhs(1.0, &warm, &PotentialSpec::free()).unwrap(),
            2.5
        );
        assert!(gaussian_sigma_ode_rhs(-1.0, &params, &pot).is_err());
        assert!(gaussian_sigma_ode_rhs(1.0, &params, &PotentialSpec::quartic(1.0)).is_err());
    }

    #[test]
    fn closed_form_laws_solve_the_moment_ode() {
        // Differentiating the laws reproduces the rhs at 20 points.
        let params = natural_with_friction();
        let pot = PotentialSpec::harmonic(1.0, 1.0);
        for k in 1..=20 {
            let t = 0.05 * k as f64;
            let s = dispersion_harmonic(t, &params, 1.0).unwrap();
            let eps = 1e-6;
            let ds = (dispersion_harmonic(t + eps, &params, 1.0).unwrap()
                - dispersion_harmonic(t - eps, &params, 1.0).unwrap())
                / (2.0 * eps);
            let rhs = gaussian_sigma_ode_rhs(s, &params, &pot).unwrap();
            assert_abs_diff_eq!(ds, rhs, epsilon = 1e-5);
        }
        let warm = PhysicalParams::new(1.0, 1.0, 0.5, 1.0).unwrap();
        let free = PotentialSpec::free();
        for k in 1..=20 {
            let t = 0.1 * k as f64;
            let s = dispersion_free_implicit(t, &warm).unwrap();
            let eps = 1e-6;
            let ds = (dispersion_free_implicit(t + eps, &warm).unwrap()
                - dispersion_free_implicit(t - eps, &warm).unwrap())
                / (2.0 * eps);
            let rhs = gaussian_sigma_ode_rhs(s, &warm, &free).unwrap();
            assert_abs_diff_eq!(ds, rhs, epsilon = 1e-5);
        }
    }

    #[test]
    fn dispersion_harmonic_values() {
        let params = natural_with_friction();
        // t = 0.25 → 0.5·√(1−e⁻¹) ≈ 0.39753
        assert_abs_diff_eq!(
            dispersion_harmonic(0.25, &params, 1.0).unwrap(),
            0.39753,
            epsilon = 1e-5
        );
        assert_abs_diff_eq!(dispersion_harmonic(0.0, &params, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(dispersion_harmonic(1e4, &params, 1.0).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn dispersion_implicit_newton() {
        // λ_T = 1, D = 1 via ħ=2, m=kT=b=1; at t=1 the root is ≈ 3.5052.
        let params = PhysicalParams::new(1.0, 1.0, 1.0, 2.0).unwrap();
        assert_abs_diff_eq!(params.lambda_t().unwrap(), 1.0);
        let s = dispersion_free_implicit(1.0, &params).unwrap();
        assert_abs_diff_eq!(s, 3.5052, epsilon = 1e-3);
        // residual of the implicit law at the returned root
        let residual = s - (1.0 + s).ln() - 2.0;
        assert!(residual.abs() < 1e-12);
        assert_abs_diff_eq!(dispersion_free_implicit(0.0, &params).unwrap(), 0.0);
    }

    #[test]
    fn dispersion_implicit_classical_limit() {
        // λ_T² < 1e−4·2Dt: within 0.1% of the Einstein law.
        let params = PhysicalParams::new(1.0, 1.0, 2500.0, 1.0).unwrap();
        let t = 1.0;
        let s = dispersion_free_implicit(t, &params).unwrap();
        let einstein = oracle::einstein_dispersion(t, &params).unwrap();
        assert!((s - einstein).abs() / einstein < 1e-3);
    }

    #[test]
    fn implicit_law_meets_zero_temperature_form() {
        // Deep quantum regime λ_T² ≫ σ²: Eq. matches ħ√(t/mb) within 0.5%.
        let params = PhysicalParams::new(1.0, 1.0, 1e-8, 1.0).unwrap();
        let t = 1.0;
        let lambda2 = params.lambda_t().unwrap().powi(2);
        let s = dispersion_free_implicit(t, &params).unwrap();
        assert!(lambda2 > 1e3 * s, "regime check");
        let pure = oracle::free_quantum_dispersion(t, &params).unwrap();
        assert!((s - pure).abs() / pure < 5e-3, "implicit {s} vs pure {pure}");
    }

    #[test]
    fn ground_state_is_a_fixed_point() {
        // kT = 0 harmonic with σ² = ħ/2mω₀: (U+Q)′ = 0 identically.
        let params = natural_with_friction();
        let pot = PotentialSpec::harmonic(1.0, 1.0);
        let g = Grid1D::new(-8.0, 8.0, 256, Boundary::Periodic).unwrap();
        let rho0 = DensityField::gaussian(0.0, 0.5, &g).unwrap();
        let dt = smoluchowski_stable_dt(&rho0, &params, &pot).unwrap();
        let mut rho = rho0.clone();
        for _ in 0..10_000 {
            rho = step_smoluchowski(&rho, &params, &pot, dt).unwrap();
        }
        let l1: f64 = rho
            .values()
            .iter()
            .zip(rho0.values().iter())
            .map(|(a, b)| (a - b).abs() * g.dx())
            .sum();
        assert!(l1 < 1e-6, "L1 drift of the stationary state: {l1}");
    }

    #[test]
    fn mass_is_conserved_per_step() {
        let params = PhysicalParams::new(1.0, 1.0, 0.5, 1.0).unwrap();
        let pot = PotentialSpec::harmonic(1.0, 1.0);
        let g = Grid1D::new(-10.0, 10.0, 256, Boundary::Periodic).unwrap();
        let mut rho = DensityField::gaussian(0.5, 0.3, &g).unwrap();
        let dt = smoluchowski_stable_dt(&rho, &params, &pot).unwrap();
        for _ in 0..200 {
            rho = step_smoluchowski(&rho, &params, &pot, dt).unwrap();
            assert!((rho.mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn classical_free_diffusion_matches_einstein() {
        // ħ = 0, free: σ²(t) − σ²(0) = 2Dt within 1% at n = 512.
        let params = PhysicalParams::new(1.0, 1.0, 1.0, 0.0).unwrap();
        let pot = PotentialSpec::free();
        let g = Grid1D::new(-14.0, 14.0, 512, Boundary::Periodic).unwrap();
        let rho0 = DensityField::gaussian(0.0, 0.25, &g).unwrap();
        let opts = SmoluchowskiOptions { t_max: 0.5, dt: None, checkpoints: 5 };
        let (series, _) = evolve_smoluchowski(&rho0, &params, &pot, opts).unwrap();
        for (t, s) in series.times.iter().zip(series.sigma2.iter()).skip(1) {
            let expect = 0.25 + oracle::einstein_dispersion(*t, &params).unwrap();
            assert!(
                (s - expect).abs() / expect < 0.01,
                "t={t}: sigma2={s} expected {expect}"
            );
        }
    }

    #[test]
    fn free_energy_decreases_at_zero_temperature() {
        let params = natural_with_friction();
        let pot = PotentialSpec::harmonic(1.0, 1.0);
        let g = Grid1D::new(-8.0, 8.0, 256, Boundary::Periodic).unwrap();
        let mut rho = DensityField::gaussian(0.3, 0.2, &g).unwrap();
        let dt = smoluchowski_stable_dt(&rho, &params, &pot).unwrap();
        let free_energy = |rho: &DensityField| -> f64 {
            let q = qpotential::quantum_potential(rho, &params).unwrap();
            let u = pot.eval_on(rho.grid());
            let integrand: Vec<f64> = rho
                .values()
                .iter()
                .zip(u.iter().zip(q.iter()))
                .map(|(&r, (&ui, &qi))| r * (ui + qi))
                .collect();
            rho.grid().integrate(&integrand)
        };
        let mut last = free_energy(&rho);
        for _ in 0..20 {
            for _ in 0..100 {
                rho = step_smoluchowski(&rho, &params, &pot, dt).unwrap();
            }
            let now = free_energy(&rho);
            assert!(now <= last + 1e-10, "free energy rose: {last} -> {now}");
            last = now;
        }
    }

    #[test]
    fn pde_tracks_the_moment_ode() {
        // Gaussian data, harmonic potential, kT > 0: PDE σ²(t) within 1%
        // of the RK4 integral curve of the moment ODE.
        let params = PhysicalParams::new(1.0, 1.0, 0.5, 1.0).unwrap();
        let pot = PotentialSpec::harmonic(1.0, 1.0);
        let g = Grid1D::new(-10.0, 10.0, 512, Boundary::Periodic).unwrap();
        let sigma2_0 = 0.2;
        let rho0 = DensityField::gaussian(0.0, sigma2_0, &g).unwrap();
        let opts = SmoluchowskiOptions { t_max: 0.6, dt: None, checkpoints: 6 };
        let (series, _) = evolve_smoluchowski(&rho0, &params, &pot, opts).unwrap();
        for (t, s) in series.times.iter().zip(series.sigma2.iter()).skip(1) {
            let reference = oracle::rk4_scalar(
                |_, y| gaussian_sigma_ode_rhs(y, &params, &pot).unwrap(),
                sigma2_0,
                0.0,
                *t,
                2_000,
            );
            assert!(
                (s - reference).abs() / reference < 0.01,
                "t={t}: pde {s} vs ode {reference}"
            );
        }
    }

    #[test]
    fn beta_quadrature_with_one_node_is_plain_step() {
        let params = PhysicalParams::new(1.0, 1.0, 0.5, 1.0).unwrap();
        let pot = PotentialSpec::harmonic(1.0, 1.0);
        let g = Grid1D::new(-8.0, 8.0, 128, Boundary::Periodic).unwrap();
        let rho = DensityField::gaussian(0.2, 0.4, &g).unwrap();
        let dt = 1e-5;
        let a = step_smoluchowski(&rho, &params, &pot, dt).unwrap();
        let b = step_nonlinear_smoluchowski(&rho, &params, &pot, dt, 1).unwrap();
        for i in 0..g.n() {
            assert_abs_diff_eq!(a.values()[i], b.values()[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn beta_quadrature_classical_limit() {
        // ħ = 0: the β integral reduces to βU and the step matches the
        // classical Smoluchowski step for every node count.
        let params = PhysicalParams::new(1.0, 1.0, 0.5, 0.0).unwrap();
        let pot = PotentialSpec::harmonic(1.0, 1.0);
        let g = Grid1D::new(-8.0, 8.0, 128, Boundary::Periodic).unwrap();
        let rho = DensityField::gaussian(0.2, 0.4, &g).unwrap();
        let dt = 1e-4;
        let a = step_smoluchowski(&rho, &params, &pot, dt).unwrap();
        for nodes in [2, 5, 9] {
            let b = step_nonlinear_smoluchowski(&rho, &params, &pot, dt, nodes).unwrap();
            for i in 0..g.n() {
                assert_abs_diff_eq!(a.values()[i], b.values()[i], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn nonlinear_equilibrium_broadens_with_hbar() {
        // Harmonic, kT > 0: the stationary variance exceeds the
        // classical kT/mω₀² and grows with ħ.
        let pot = PotentialSpec::harmonic(1.0, 1.0);
        let g = Grid1D::new(-12.0, 12.0, 256, Boundary::Periodic).unwrap();
        let classical_var = 1.0; // kT/mω₀² at kT = 1
        let stationary_var = |hbar: f64| {
            let params = PhysicalParams::new(1.0, 1.0, 1.0, hbar).unwrap();
            let mut rho = DensityField::gaussian(0.0, classical_var, &g).unwrap();
            let dt = 0.5 * smoluchowski_stable_dt(&rho, &params, &pot).unwrap();
            let steps = (8.0 / dt) as usize;
            for _ in 0..steps {
                rho = step_nonlinear_smoluchowski(&rho, &params, &pot, dt, 9).unwrap();
            }
            rho.moments().unwrap().1
        };
        let v0 = stationary_var(0.0);
        let v05 = stationary_var(0.5);
        let v1 = stationary_var(1.0);
        assert_abs_diff_eq!(v0, classical_var, epsilon = 0.01);
        assert!(v05 > v0 + 1e-3, "hbar=0.5 variance {v05} vs classical {v0}");
        assert!(v1 > v05 + 1e-3, "hbar=1 variance {v1} vs hbar=0.5 {v05}");
    }

    #[test]
    fn rejects_frictionless_and_unstable_steps() {
        let pot = PotentialSpec::free();
        let g = Grid1D::new(-8.0, 8.0, 128, Boundary::Periodic).unwrap();
        let rho = DensityField::gaussian(0.0, 0.5, &g).unwrap();
        let frictionless = PhysicalParams::natural();
        assert!(step_smoluchowski(&rho, &frictionless, &pot, 1e-6).is_err());
        let params = natural_with_friction();
        let bound = smoluchowski_stable_dt(&rho, &params, &pot).unwrap();
        assert!(matches!(
            step_smoluchowski(&rho, &params, &pot, 2.0 * bound),
            Err(Error::UnstableStep { .. })
        ));
    }
}
