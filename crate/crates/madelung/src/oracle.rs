// Copyright 2026 Madelung Contributors
// SPDX-License-Identifier: Apache-2.0

//! Independent reference values and low-tech integrators used to
//! validate the solvers. Nothing here shares discretization code with
//! the solvers under test: references are closed-form or integrated by
//! plain Runge–Kutta at tolerances well below any solver tolerance.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::PhysicalParams;
use crate::potential::PotentialSpec;

/// A labelled reference curve t ↦ value with a provenance note.
pub struct ReferenceCurve {
    pub label: String,
    pub provenance: String,
    f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ReferenceCurve {
    pub fn new(
        label: impl Into<String>,
        provenance: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { label: label.into(), provenance: provenance.into(), f: Box::new(f) }
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.f)(t)
    }
}

impl std::fmt::Debug for ReferenceCurve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReferenceCurve").field("label", &self.label).finish()
    }
}

/// Classic fixed-step RK4 for a scalar ODE y′ = f(t, y).
pub fn rk4_scalar<F: Fn(f64, f64) -> f64>(f: F, y0: f64, t0: f64, t1: f64, steps: usize) -> f64 {
    let h = (t1 - t0) / steps as f64;
    let mut y = y0;
    let mut t = t0;
    for _ in 0..steps {
        let k1 = f(t, y);
        let k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
        let k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
        let k4 = f(t + h, y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
    }
    y
}

/// RK4 for small vector ODEs.
pub fn rk4_vec<const N: usize, F: Fn(f64, &[f64; N]) -> [f64; N]>(
    f: F,
    y0: [f64; N],
    t0: f64,
    t1: f64,
    steps: usize,
) -> [f64; N] {
    let h = (t1 - t0) / steps as f64;
    let mut y = y0;
    let mut t = t0;
    let add = |a: &[f64; N], b: &[f64; N], s: f64| {
        let mut out = *a;
        for i in 0..N {
            out[i] += s * b[i];
        }
        out
    };
    for _ in 0..steps {
        let k1 = f(t, &y);
        let k2 = f(t + 0.5 * h, &add(&y, &k1, 0.5 * h));
        let k3 = f(t + 0.5 * h, &add(&y, &k2, 0.5 * h));
        let k4 = f(t + h, &add(&y, &k3, h));
        for i in 0..N {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
    }
    y
}

/// Decay factor of the canonical commutator under damped linear
/// dynamics, computed as det M(t) of the transition matrix of
/// (ẋ = v, v̇ = −ω₀²x − (b/m)v) by RK4 integration of the matrix ODE.
///
/// For linear Heisenberg operators [r̂(t), p̂(t)] = det M(t)·iħ, and by
/// the Liouville trace formula det M(t) = exp(−bt/m).
pub fn commutator_factor(params: &PhysicalParams, pot: &PotentialSpec, t: f64) -> Result<f64> {
    if !pot.is_quadratic() {
        return Err(Error::invalid(
            "commutator factor is defined for linear dynamics (potential degree <= 2)",
        ));
    }
    if t < 0.0 {
        return Err(Error::invalid("time must be >= 0"));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let omega_sq = pot.derivative_at(0.0, 2) / params.mass; // U″/m = ω₀²
    let gamma = params.friction / params.mass;
    // Columns of M stacked as [x1, v1, x2, v2]; M(0) = I.
    let rhs = move |_t: f64, y: &[f64; 4]| {
        [y[1], -omega_sq * y[0] - gamma * y[1], y[3], -omega_sq * y[2] - gamma * y[3]]
    };
    let steps = ((t / 1e-3).ceil() as usize).clamp(1000, 2_000_000);
    let m = rk4_vec(rhs, [1.0, 0.0, 0.0, 1.0], 0.0, t, steps);
    Ok(m[0] * m[3] - m[2] * m[1])
}

/// Zero-temperature dispersion of a free damped quantum particle,
/// σ²(t) = ħ√(t/mb).
pub fn free_quantum_dispersion(t: f64, params: &PhysicalParams) -> Result<f64> {
    if params.friction <= 0.0 {
        return Err(Error::invalid("free quantum dispersion needs b > 0"));
    }
    if t < 0.0 {
        return Err(Error::invalid("time must be >= 0"));
    }
    Ok(params.hbar * (t / (params.mass * params.friction)).sqrt())
}

/// Classical Einstein law σ²(t) = 2Dt.
pub fn einstein_dispersion(t: f64, params: &PhysicalParams) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::invalid("time must be >= 0"));
    }
    Ok(2.0 * params.diffusion()? * t)
}

/// Equilibrium references for a harmonic well.
pub struct EquilibriumRefs {
    /// Ground-state position dispersion ħ/2mω₀.
    pub ground_sigma2: f64,
    /// Classical thermal dispersion k_BT/mω₀².
    pub classical_sigma2: f64,
    mass: f64,
    kt: f64,
    pot: PotentialSpec,
    log_z: f64,
}

impl EquilibriumRefs {
    /// Normalized Maxwell–Boltzmann phase-space density
    /// W(x, p) = exp(−(p²/2m + U)/k_BT)/Z.
    pub fn mb_density(&self, x: f64, p: f64) -> f64 {
        let h = p * p / (2.0 * self.mass) + self.pot.eval(x);
        (-h / self.kt - self.log_z).exp()
    }
}

pub fn equilibrium_references(params: &PhysicalParams, pot: &PotentialSpec) -> Result<EquilibriumRefs> {
    let curvature = pot.derivative_at(0.0, 2);
    if pot.degree() != 2 || curvature <= 0.0 {
        return Err(Error::invalid("equilibrium references need a harmonic potential"));
    }
    if params.kt <= 0.0 {
        return Err(Error::invalid("Maxwell-Boltzmann references need kT > 0"));
    }
    let omega0 = (curvature / params.mass).sqrt();
    // Z = ∫∫ exp(−(p²/2m + mω₀²x²/2)/kT) dx dp = 2π·kT/ω₀.
    let log_z = (2.0 * std::f64::consts::PI * params.kt / omega0).ln();
    Ok(EquilibriumRefs {
        ground_sigma2: params.hbar / (2.0 * params.mass * omega0),
        classical_sigma2: params.kt / (params.mass * omega0 * omega0),
        mass: params.mass,
        kt: params.kt,
        pot: pot.clone(),
        log_z,
    })
}

/// Mean position of the damped classical oscillator
/// m⟨x⟩″ + b⟨x⟩′ = −mω₀²⟨x⟩, closed form in all damping regimes.
pub fn damped_oscillator_mean(t: f64, x0: f64, v0: f64, params: &PhysicalParams, omega0: f64) -> f64 {
    let gamma = params.friction / (2.0 * params.mass);
    let disc = Complex64::new(gamma * gamma - omega0 * omega0, 0.0).sqrt();
    if disc.norm() < 1e-14 {
        // Critically damped: x = (x0 + (v0 + γx0) t) e^{−γt}
        return (x0 + (v0 + gamma * x0) * t) * (-gamma * t).exp();
    }
    // x(t) = e^{−γt}[x0 cosh(Δt) + (v0 + γx0)/Δ · sinh(Δt)] with Δ
    // possibly imaginary (underdamped: cosh → cos, sinh → i sin).
    let dt = disc * t;
    let cosh = (dt.exp() + (-dt).exp()) * 0.5;
    let sinh = (dt.exp() - (-dt).exp()) * 0.5;
    let val = cosh * x0 + sinh * (v0 + gamma * x0) / disc;
    (-gamma * t).exp() * val.re
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn commutator_decay_matches_trace_formula() {
        // b/m = 1, t = 1 → e⁻¹ ≈ 0.36788, independent of ω₀.
        let params = PhysicalParams::new(1.0, 1.0, 0.0, 1.0).unwrap();
        for pot in [PotentialSpec::free(), PotentialSpec::harmonic(1.0, 1.0), PotentialSpec::harmonic(1.0, 2.5)] {
            let f = commutator_factor(&params, &pot, 1.0).unwrap();
            assert_abs_diff_eq!(f, (-1.0_f64).exp(), epsilon = 1e-10);
            assert_abs_diff_eq!(f, 0.36788, epsilon = 1e-5);
        }
    }

    #[test]
    fn commutator_identity_and_symplectic_limits() {
        let params = PhysicalParams::new(1.0, 1.0, 0.0, 1.0).unwrap();
        let pot = PotentialSpec::harmonic(1.0, 1.0);
        assert_abs_diff_eq!(commutator_factor(&params, &pot, 0.0).unwrap(), 1.0);
        // b = 0: symplectic flow, determinant 1 for all t.
        let frictionless = PhysicalParams::natural();
        for t in [0.5, 2.0, 7.0] {
            assert_abs_diff_eq!(
                commutator_factor(&frictionless, &pot, t).unwrap(),
                1.0,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn commutator_rejects_nonlinear_potentials() {
        let params = PhysicalParams::new(1.0, 1.0, 0.0, 1.0).unwrap();
        assert!(commutator_factor(&params, &PotentialSpec::quartic(0.25), 1.0).is_err());
    }

    #[test]
    fn free_quantum_dispersion_values() {
        let params = PhysicalParams::new(1.0, 1.0, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(free_quantum_dispersion(4.0, &params).unwrap(), 2.0);
        assert_abs_diff_eq!(free_quantum_dispersion(0.0, &params).unwrap(), 0.0);
    }

    #[test]
    fn einstein_dispersion_values() {
        let params = PhysicalParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(einstein_dispersion(3.0, &params).unwrap(), 6.0);
        assert_abs_diff_eq!(einstein_dispersion(0.0, &params).unwrap(), 0.0);
        let p = PhysicalParams::new(1.0, 4.0, 2.0, 1.0).unwrap();
        assert_abs_diff_eq!(einstein_dispersion(1.0, &p).unwrap(), 1.0);
    }

    #[test]
    fn equilibrium_reference_values() {
        let params = PhysicalParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let pot = PotentialSpec::harmonic(1.0, 1.0);
        let refs = equilibrium_references(&params, &pot).unwrap();
        assert_abs_diff_eq!(refs.ground_sigma2, 0.5);
        assert_abs_diff_eq!(refs.classical_sigma2, 1.0);
        // MB density is normalized.
        let mut total = 0.0;
        let h = 0.05;
        let mut x = -10.0;
        while x < 10.0 {
            let mut p = -10.0;
            while p < 10.0 {
                total += refs.mb_density(x, p) * h * h;
                p += h;
            }
            x += h;
        }
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn damped_oscillator_limits() {
        let params = PhysicalParams::new(1.0, 0.0, 0.0, 1.0).unwrap();
        // No damping: pure cosine.
        for t in [0.0, 0.7, 2.0] {
            assert_abs_diff_eq!(damped_oscillator_mean(t, 1.0, 0.0, &params, 1.0), t.cos(), epsilon = 1e-12);
        }
        // Closed form agrees with RK4 integration of the same ODE.
        let damped = PhysicalParams::new(1.0, 0.4, 0.0, 1.0).unwrap();
        let rhs = |_t: f64, y: &[f64; 2]| [y[1], -y[0] - 0.4 * y[1]];
        let y = rk4_vec(rhs, [1.0, 0.0], 0.0, 5.0, 20_000);
        assert_abs_diff_eq!(damped_oscillator_mean(5.0, 1.0, 0.0, &damped, 1.0), y[0], epsilon = 1e-10);
        // Overdamped regime stays finite and decays.
        let over = PhysicalParams::new(1.0, 10.0, 0.0, 1.0).unwrap();
        let x = damped_oscillator_mean(3.0, 1.0, 0.0, &over, 1.0);
        assert!(x > 0.0 && x < 1.0);
    }

    #[test]
    fn reference_curve_wraps_closures() {
        let c = ReferenceCurve::new("einstein", "2Dt with D = 1", |t| 2.0 * t);
        assert_abs_diff_eq!(c.eval(1.5), 3.0);
    }
}
