// Copyright 2026 Madelung Contributors
// SPDX-License-Identifier: Apache-2.0

//! Stochastic trajectory ensembles for
//!
//!   mR̈ + bṘ = −∂ₓU + f_Q + f_L,
//!
//! advanced by Euler–Maruyama with the thermal kick variance fixed by
//! the Langevin autocorrelation ⟨f_L(t)f_L(s)⟩ = 2bk_BTδ(t−s), i.e.
//! velocity kicks of variance 2bk_BT·dt/m² per step.
//!
//! The microscopic law of the vacuum force f_Q is not specified by the
//! theory at this level; two concrete models are provided and labelled
//! as models:
//!
//! * quadratic-exact mode ([`QuantumForce::None`] with Wigner-sampled
//!   initial conditions) — for free and harmonic potentials the
//!   quantum evolution is classical transport of W, so trajectories
//!   with no quantum force at all reproduce every quantum moment;
//! * mean-field mode ([`QuantumForce::MeanField`]) — the deterministic
//!   force −∂ₓQ[ρ̂] evaluated from the ensemble's own kernel density
//!   estimate, the trajectory-level form of the pressure-gradient
//!   closure ∂ₓP = ρ∂ₓQ.
//!
//! Every particle owns a counter-based RNG stream keyed by
//! (seed, particle, step), so trajectories are bit-identical for a
//! given seed regardless of chunking, thread count, or execution
//! order.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::field::DensityField;
use crate::grid::{Boundary, Grid1D};
use crate::par;
use crate::params::PhysicalParams;
use crate::phasespace::PhaseSpaceGrid;
use crate::potential::PotentialSpec;

/// Minimum ensemble size for any statistics call.
pub const MIN_STATISTICS_N: usize = 100;

/// Minimum ensemble size for the kernel density estimate.
pub const MIN_KDE_N: usize = 1000;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stateless counter-based normal generator: the value at
/// (seed, stream, counter) never depends on evaluation order.
#[derive(Debug, Clone, Copy)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn for_stream(seed: u64, stream: u64) -> Self {
        Self { key: splitmix64(seed ^ splitmix64(stream.wrapping_mul(0xA24B_AED4_963E_E407))) }
    }

    /// Uniform draw in (0, 1).
    pub fn uniform(&self, counter: u64) -> f64 {
        let bits = splitmix64(self.key ^ counter.wrapping_mul(0xD6E8_FEB8_6659_FD93));
        ((bits >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Independent standard-normal pair (Box–Muller) at one counter.
    pub fn normal_pair(&self, counter: u64) -> (f64, f64) {
        let u1 = self.uniform(2 * counter);
        let u2 = self.uniform(2 * counter + 1);
        let r = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        (r * angle.cos(), r * angle.sin())
    }

    pub fn normal(&self, counter: u64) -> f64 {
        self.normal_pair(counter).0
    }
}

/// N trajectories with per-particle RNG streams.
#[derive(Debug, Clone)]
pub struct TrajectoryEnsemble {
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    seed: u64,
    time: f64,
    /// Counter for the next step's noise draws; counter 0 is reserved
    /// for the initial sampling.
    step_index: u64,
}

impl TrajectoryEnsemble {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn time(&self) -> f64 {
        self.time
    }
}

/// Gaussian phase-space law (x̄, σ_x², v̄, σ_v², cov) to sample initial
/// conditions from.
#[derive(Debug, Clone, Copy)]
pub struct GaussianPhaseSpec {
    pub mean_x: f64,
    pub var_x: f64,
    pub mean_v: f64,
    pub var_v: f64,
    pub cov: f64,
}

impl GaussianPhaseSpec {
    /// Minimal-uncertainty ground-state law of a harmonic well:
    /// σ_x² = ħ/2mω₀, σ_v² = ħω₀/2m, cov = 0 (so σ_x·mσ_v = ħ/2).
    pub fn ground_state(params: &PhysicalParams, omega0: f64) -> Self {
        Self {
            mean_x: 0.0,
            var_x: params.hbar / (2.0 * params.mass * omega0),
            mean_v: 0.0,
            var_v: params.hbar * omega0 / (2.0 * params.mass),
            cov: 0.0,
        }
    }

    pub fn displaced(mut self, mean_x: f64, mean_v: f64) -> Self {
        self.mean_x = mean_x;
        self.mean_v = mean_v;
        self
    }
}

/// Sample N particles from a bivariate Gaussian law; realizes a chosen
/// Gaussian Wigner function as an initial ensemble.
pub fn sample_wigner_initial(
    spec: &GaussianPhaseSpec,
    n: usize,
    seed: u64,
) -> Result<TrajectoryEnsemble> {
    if n == 0 {
        return Err(Error::invalid("ensemble size must be >= 1"));
    }
    if spec.var_x < 0.0 || spec.var_v < 0.0 {
        return Err(Error::invalid("variances must be >= 0"));
    }
    let det = spec.var_x * spec.var_v - spec.cov * spec.cov;
    if det < -1e-15 * (spec.var_x * spec.var_v).max(1.0) {
        return Err(Error::invalid("covariance matrix is not positive semidefinite"));
    }
    // Cholesky of [[var_x, cov], [cov, var_v]], degenerate rows allowed.
    let a = spec.var_x.sqrt();
    let (b, c) = if a > 0.0 {
        let b = spec.cov / a;
        (b, (spec.var_v - b * b).max(0.0).sqrt())
    } else {
        if spec.cov != 0.0 {
            return Err(Error::invalid("cov must vanish when var_x = 0"));
        }
        (0.0, spec.var_v.sqrt())
    };

    let mut positions = vec![0.0; n];
    let mut velocities = vec![0.0; n];
    par::for_each_indexed_chunk2(
        &mut positions,
        &mut velocities,
        par::PARTICLE_CHUNK,
        |base, xs, vs| {
            for (off, (x, v)) in xs.iter_mut().zip(vs.iter_mut()).enumerate() {
                let i = base + off;
                let (z1, z2) = CounterRng::for_stream(seed, i as u64).normal_pair(0);
                *x = spec.mean_x + a * z1;
                *v = spec.mean_v + b * z1 + c * z2;
            }
        },
    );
    Ok(TrajectoryEnsemble { positions, velocities, seed, time: 0.0, step_index: 1 })
}

/// Bandwidth rule for the kernel density estimate.
#[derive(Debug, Clone, Copy)]
pub enum BandwidthRule {
    /// h = 1.06·σ̂·N^{−1/5}.
    Silverman,
    Fixed(f64),
}

/// Quantum force model applied to each trajectory.
#[derive(Debug, Clone, Copy)]
pub enum QuantumForce {
    None,
    MeanField(BandwidthRule),
}

/// Forces acting on the ensemble.
#[derive(Debug, Clone)]
pub struct ForceModel {
    /// Apply the stochastic Langevin kicks (needs b > 0).
    pub thermal: bool,
    pub quantum: QuantumForce,
    pub potential: PotentialSpec,
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepDiagnostics {
    /// Particles whose mean-field force was flat-extrapolated outside
    /// the KDE support.
    pub extrapolated: usize,
    /// Ensemble average of the quantum force (zero-mean check).
    pub mean_quantum_force: f64,
    /// Standard error of that average.
    pub quantum_force_se: f64,
}

/// One Euler–Maruyama step:
/// v ← v + dt(−U′+F_Q)/m − dt(b/m)v + ξ, x ← x + dt·v, with
/// ξ ~ N(0, 2bk_BT·dt/m²) drawn from the particle's own stream.
pub fn step_ensemble(
    ens: &mut TrajectoryEnsemble,
    params: &PhysicalParams,
    model: &ForceModel,
    dt: f64,
) -> Result<StepDiagnostics> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt must be > 0"));
    }
    if model.thermal && params.friction <= 0.0 {
        return Err(Error::invalid("thermal kicks need b > 0"));
    }
    let mut diag = StepDiagnostics::default();
    let quantum_force: Option<MeanFieldForce> = match model.quantum {
        QuantumForce::None => None,
        QuantumForce::MeanField(rule) => {
            let f = meanfield_quantum_force(ens, params, rule)?;
            diag.extrapolated = f.extrapolated;
            diag.mean_quantum_force = f.mean;
            diag.quantum_force_se = f.standard_error;
            Some(f)
        }
    };

    let kick = if model.thermal && params.kt > 0.0 {
        (2.0 * params.friction * params.kt * dt).sqrt() / params.mass
    } else {
        0.0
    };
    let drag = dt * params.friction / params.mass;
    let seed = ens.seed;
    let step = ens.step_index;
    let pot = &model.potential;
    let fq = quantum_force.as_ref().map(|f| f.per_particle.as_slice());

    par::for_each_indexed_chunk2(
        &mut ens.positions,
        &mut ens.velocities,
        par::PARTICLE_CHUNK,
        |base, xs, vs| {
            for (off, (x, v)) in xs.iter_mut().zip(vs.iter_mut()).enumerate() {
                let i = base + off;
                let mut force = -pot.derivative_at(*x, 1);
                if let Some(fq) = fq {
                    force += fq[i];
                }
                *v += dt * force / params.mass - drag * *v;
                if kick > 0.0 {
                    *v += kick * CounterRng::for_stream(seed, i as u64).normal(step);
                }
                *x += dt * *v;
            }
        },
    );
    ens.time += dt;
    ens.step_index += 1;
    Ok(diag)
}

/// Sequential twin of [`step_ensemble`] (same arithmetic, no thread
/// pool); kept public for the benchmark suite and as the reference
/// path of the non-parallel build.
pub fn step_ensemble_serial(
    ens: &mut TrajectoryEnsemble,
    params: &PhysicalParams,
    model: &ForceModel,
    dt: f64,
) -> Result<StepDiagnostics> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt must be > 0"));
    }
    if model.thermal && params.friction <= 0.0 {
        return Err(Error::invalid("thermal kicks need b > 0"));
    }
    let mut diag = StepDiagnostics::default();
    let quantum_force: Option<MeanFieldForce> = match model.quantum {
        QuantumForce::None => None,
        QuantumForce::MeanField(rule) => {
            let f = meanfield_quantum_force(ens, params, rule)?;
            diag.extrapolated = f.extrapolated;
            diag.mean_quantum_force = f.mean;
            diag.quantum_force_se = f.standard_error;
            Some(f)
        }
    };
    let kick = if model.thermal && params.kt > 0.0 {
        (2.0 * params.friction * params.kt * dt).sqrt() / params.mass
    } else {
        0.0
    };
    let drag = dt * params.friction / params.mass;
    for i in 0..ens.positions.len() {
        let mut force = -model.potential.derivative_at(ens.positions[i], 1);
        if let Some(fq) = quantum_force.as_ref() {
            force += fq.per_particle[i];
        }
        ens.velocities[i] += dt * force / params.mass - drag * ens.velocities[i];
        if kick > 0.0 {
            ens.velocities[i] +=
                kick * CounterRng::for_stream(ens.seed, i as u64).normal(ens.step_index);
        }
        ens.positions[i] += dt * ens.velocities[i];
    }
    ens.time += dt;
    ens.step_index += 1;
    Ok(diag)
}

/// Mean-field quantum force −∂ₓQ[ρ̂] from the ensemble's kernel
/// density estimate.
#[derive(Debug, Clone)]
pub struct MeanFieldForce {
    pub per_particle: Vec<f64>,
    /// Scratch grid the KDE and force live on.
    pub grid: Grid1D,
    pub grid_force: Array1<f64>,
    pub bandwidth: f64,
    pub extrapolated: usize,
    pub mean: f64,
    pub standard_error: f64,
}

/// Half-width, in standardized units z = (x − x̄)/σ̂, of the region the
/// force polynomial is trusted on; outside it the force is held flat.
const FORCE_SUPPORT_Z: f64 = 4.0;

/// Degree of the log-density projection. Ample for the nodeless
/// Gaussian-class densities this module is scoped to (a Gaussian is
/// degree 2).
const LOG_FIT_DEGREE: usize = 4;

/// Evaluate ρ̂ by a binned Gaussian KDE on a scratch grid, project
/// ln ρ̂ onto a low-degree polynomial (ρ̂-weighted least squares), and
/// differentiate the projection analytically:
///
///   Q = −(ħ²/4m)(u″ + u′²/2),  force = −∂ₓQ = (ħ²/4m)(u‴ + u′u″),
///
/// with u the fitted log density. Differentiating the raw KDE instead
/// would be hopeless: the third derivative of a Silverman-bandwidth
/// estimate at N = 10⁵ carries order-one sampling noise, while the
/// projection aggregates the whole sample and its coefficients
/// converge at the N^{−1/2} rate. Outside the fitted support the force
/// is extrapolated flat and the affected particles are counted.
pub fn meanfield_quantum_force(
    ens: &TrajectoryEnsemble,
    params: &PhysicalParams,
    rule: BandwidthRule,
) -> Result<MeanFieldForce> {
    let n = ens.len();
    if n < MIN_KDE_N {
        return Err(Error::invalid(format!(
            "mean-field force needs N >= {MIN_KDE_N}, got {n}"
        )));
    }
    let (mean, var) = slice_moments(&ens.positions);
    let sigma = var.sqrt();
    if !(sigma > 0.0) {
        return Err(Error::invalid("degenerate ensemble: zero position spread"));
    }
    let bandwidth = match rule {
        BandwidthRule::Silverman => 1.06 * sigma * (n as f64).powf(-0.2),
        BandwidthRule::Fixed(h) if h > 0.0 => h,
        BandwidthRule::Fixed(h) => {
            return Err(Error::invalid(format!("bandwidth must be > 0, got {h}")))
        }
    };

    // Scratch grid spanning the sample and the kernel support.
    let lo = ens.positions.iter().cloned().fold(f64::INFINITY, f64::min) - 5.0 * bandwidth;
    let hi = ens.positions.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 5.0 * bandwidth;
    let n_grid = 512;
    let grid = Grid1D::new(lo, hi, n_grid, Boundary::Clamped)?;
    let dx = grid.dx();

    // Deterministic binned histogram: per-chunk counts combined in
    // chunk order.
    let partials = par::map_chunks(&ens.positions, par::PARTICLE_CHUNK, |_base, chunk| {
        let mut counts = vec![0.0_f64; n_grid];
        for &x in chunk {
            let idx = ((x - lo) / dx).round() as isize;
            let idx = idx.clamp(0, n_grid as isize - 1) as usize;
            counts[idx] += 1.0;
        }
        counts
    });
    let mut hist = vec![0.0_f64; n_grid];
    for partial in partials {
        for (h, p) in hist.iter_mut().zip(partial.iter()) {
            *h += p;
        }
    }

    // Convolve with the sampled Gaussian kernel.
    let half_width = ((4.0 * bandwidth / dx).ceil() as usize).max(1);
    let kernel: Vec<f64> = (0..=half_width)
        .map(|k| {
            let u = k as f64 * dx / bandwidth;
            (-0.5 * u * u).exp()
        })
        .collect();
    let kernel_norm: f64 = (kernel[0] + 2.0 * kernel[1..].iter().sum::<f64>()) * dx * n as f64;
    let mut density = Array1::zeros(n_grid);
    for j in 0..n_grid {
        let mut acc = hist[j] * kernel[0];
        for k in 1..=half_width {
            if j >= k {
                acc += hist[j - k] * kernel[k];
            }
            if j + k < n_grid {
                acc += hist[j + k] * kernel[k];
            }
        }
        density[j] = acc / kernel_norm;
    }
    let mut rho = DensityField::from_raw(grid.clone(), density);
    rho.normalize()?;

    // Weighted projection of ln ρ̂ in standardized coordinates.
    let peak = rho.values().iter().cloned().fold(0.0_f64, f64::max);
    let dim = LOG_FIT_DEGREE + 1;
    let mut normal = [[0.0_f64; 5]; 5];
    let mut rhs = [0.0_f64; 5];
    for j in 0..n_grid {
        let w = rho.values()[j];
        if w <= 1e-6 * peak {
            continue;
        }
        let z = (grid.node(j) - mean) / sigma;
        let u = w.ln();
        let mut pow = [0.0_f64; 9];
        pow[0] = 1.0;
        for k in 1..9 {
            pow[k] = pow[k - 1] * z;
        }
        for a in 0..dim {
            rhs[a] += w * pow[a] * u;
            for b in a..dim {
                normal[a][b] += w * pow[a + b];
            }
        }
    }
    for a in 0..dim {
        for b in 0..a {
            normal[a][b] = normal[b][a];
        }
    }
    let coeffs = solve_small(normal, rhs, dim)?;

    // force(x) = (ħ²/4m)(u‴ + u′u″) with z-derivatives rescaled by σ̂.
    let fit_force = |x: f64| -> f64 {
        let z = ((x - mean) / sigma).clamp(-FORCE_SUPPORT_Z, FORCE_SUPPORT_Z);
        let mut u1 = 0.0;
        let mut u2 = 0.0;
        let mut u3 = 0.0;
        for (a, &c) in coeffs.iter().enumerate().take(dim).skip(1) {
            let af = a as f64;
            u1 += af * c * z.powi(a as i32 - 1);
            if a >= 2 {
                u2 += af * (af - 1.0) * c * z.powi(a as i32 - 2);
            }
            if a >= 3 {
                u3 += af * (af - 1.0) * (af - 2.0) * c * z.powi(a as i32 - 3);
            }
        }
        let s = sigma;
        let u1 = u1 / s;
        let u2 = u2 / (s * s);
        let u3 = u3 / (s * s * s);
        params.hbar * params.hbar / (4.0 * params.mass) * (u3 + u1 * u2)
    };

    let grid_force = Array1::from_iter((0..n_grid).map(|j| fit_force(grid.node(j))));
    let mut per_particle = vec![0.0; n];
    par::for_each_indexed_chunk(&mut per_particle, par::PARTICLE_CHUNK, |base, fs| {
        for (off, f) in fs.iter_mut().enumerate() {
            *f = fit_force(ens.positions[base + off]);
        }
    });
    let extrapolated = ens
        .positions
        .iter()
        .filter(|&&x| ((x - mean) / sigma).abs() > FORCE_SUPPORT_Z)
        .count();

    let (f_mean, f_var) = slice_moments(&per_particle);
    Ok(MeanFieldForce {
        per_particle,
        grid,
        grid_force,
        bandwidth,
        extrapolated,
        mean: f_mean,
        standard_error: (f_var / n as f64).sqrt(),
    })
}

/// Gaussian elimination with partial pivoting for the tiny normal
/// systems of the log-density projection.
fn solve_small(mut a: [[f64; 5]; 5], mut b: [f64; 5], dim: usize) -> Result<[f64; 5]> {
    for col in 0..dim {
        let mut pivot = col;
        for row in col + 1..dim {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::Numerical("singular normal equations in the log fit".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..dim {
            let factor = a[row][col] / a[col][col];
            for k in col..dim {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0_f64; 5];
    for col in (0..dim).rev() {
        let mut acc = b[col];
        for k in col + 1..dim {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Ok(x)
}

/// Deterministic two-pass mean and population variance of a slice,
/// accumulated over fixed chunks.
fn slice_moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let sums = par::map_chunks(values, par::PARTICLE_CHUNK, |_b, c| c.iter().sum::<f64>());
    let mean = sums.iter().sum::<f64>() / n;
    let sq = par::map_chunks(values, par::PARTICLE_CHUNK, |_b, c| {
        c.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>()
    });
    let var = sq.iter().sum::<f64>() / n;
    (mean, var)
}

/// Velocity average over an x-bin.
#[derive(Debug, Clone, Copy)]
pub struct BinnedVelocity {
    pub x_center: f64,
    pub mean_v: f64,
    pub count: usize,
}

/// Ensemble moments, the hydrodynamic velocity estimate V(x), and an
/// optional phase-space histogram.
#[derive(Debug, Clone)]
pub struct EnsembleStatistics {
    pub mean_x: f64,
    pub var_x: f64,
    pub mean_v: f64,
    pub var_v: f64,
    /// Bins with at least [`MIN_BIN_COUNT`] samples.
    pub binned_velocity: Vec<BinnedVelocity>,
    /// Occupied bins skipped for having too few samples.
    pub undersampled_bins: usize,
    /// (x, p) histogram normalized as a phase-space density, when a
    /// grid was supplied.
    pub histogram: Option<Array2<f64>>,
}

/// Minimum samples per bin for a V(x) estimate.
pub const MIN_BIN_COUNT: usize = 10;

pub fn ensemble_statistics(
    ens: &TrajectoryEnsemble,
    params: &PhysicalParams,
    psg: Option<&PhaseSpaceGrid>,
    velocity_bins: usize,
) -> Result<EnsembleStatistics> {
    let n = ens.len();
    if n < MIN_STATISTICS_N {
        return Err(Error::invalid(format!(
            "statistics need N >= {MIN_STATISTICS_N}, got {n}"
        )));
    }
    let (mean_x, var_x) = slice_moments(&ens.positions);
    let (mean_v, var_v) = slice_moments(&ens.velocities);

    let bins = velocity_bins.max(4);
    let lo = ens.positions.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ens.positions.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = ((hi - lo) / bins as f64).max(f64::MIN_POSITIVE);
    let mut sums = vec![0.0_f64; bins];
    let mut counts = vec![0usize; bins];
    for (&x, &v) in ens.positions.iter().zip(ens.velocities.iter()) {
        let idx = (((x - lo) / width) as usize).min(bins - 1);
        sums[idx] += v;
        counts[idx] += 1;
    }
    let mut binned_velocity = Vec::new();
    let mut undersampled = 0;
    for j in 0..bins {
        if counts[j] >= MIN_BIN_COUNT {
            binned_velocity.push(BinnedVelocity {
                x_center: lo + (j as f64 + 0.5) * width,
                mean_v: sums[j] / counts[j] as f64,
                count: counts[j],
            });
        } else if counts[j] > 0 {
            undersampled += 1;
        }
    }

    let histogram = psg.map(|grid| {
        let mut h = Array2::zeros((grid.n_x(), grid.n_p()));
        let x0 = grid.x().x_min();
        let dx = grid.x().dx();
        let p0 = -grid.p_max();
        let dp = grid.dp();
        let mass_norm = 1.0 / (n as f64 * dx * dp);
        for (&x, &v) in ens.positions.iter().zip(ens.velocities.iter()) {
            let p = params.mass * v;
            let i = ((x - x0) / dx).floor() as isize;
            let j = ((p - p0) / dp).floor() as isize;
            if i >= 0 && (i as usize) < grid.n_x() && j >= 0 && (j as usize) < grid.n_p() {
                h[[i as usize, j as usize]] += mass_norm;
            }
        }
        h
    });

    Ok(EnsembleStatistics {
        mean_x,
        var_x,
        mean_v,
        var_v,
        binned_velocity,
        undersampled_bins: undersampled,
        histogram,
    })
}
