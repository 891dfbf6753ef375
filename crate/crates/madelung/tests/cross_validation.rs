// Copyright 2026 Madelung Contributors
// SPDX-License-Identifier: Apache-2.0

//! Cross-module consistency: the same physics computed by independent
//! discretizations must agree within combined error bars.

use madelung::grid::{Boundary, Grid1D};
use madelung::langevin::{self, ForceModel, GaussianPhaseSpec, QuantumForce};
use madelung::phasespace::{self, PhaseSpaceGrid, PhaseSpaceModel};
use madelung::potential::PotentialSpec;
use madelung::PhysicalParams;

/// Thermal-only Langevin ensembles against the Klein–Kramers PDE:
/// x-variance trajectories agree within three combined standard errors
/// at ten checkpoints.
#[test]
fn klein_kramers_matches_langevin_variance_trajectory() {
    let params = PhysicalParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
    let pot = PotentialSpec::harmonic(1.0, 1.0);

    // Start both from the same squeezed Gaussian, colder than
    // equilibrium, and watch the variance relax.
    let var_x0 = 0.4;
    let var_v0 = 0.6;

    let grid = Grid1D::new(-8.0, 8.0, 128, Boundary::Periodic).unwrap();
    let psg = PhaseSpaceGrid::new(grid.clone(), 8.0, 128).unwrap();
    let mut w_values = ndarray::Array2::zeros((psg.n_x(), psg.n_p()));
    for i in 0..psg.n_x() {
        let x = grid.node(i);
        for j in 0..psg.n_p() {
            let p = psg.p_node(j);
            w_values[[i, j]] =
                (-0.5 * x * x / var_x0 - 0.5 * p * p / (params.mass * params.mass * var_v0)).exp();
        }
    }
    let mut w = phasespace::WignerField::new(psg.clone(), w_values, 0.0).unwrap();
    w.normalize().unwrap();

    let n = 50_000;
    let spec = GaussianPhaseSpec { mean_x: 0.0, var_x: var_x0, mean_v: 0.0, var_v: var_v0, cov: 0.0 };
    let mut ens = langevin::sample_wigner_initial(&spec, n, 424242).unwrap();
    let force = ForceModel { thermal: true, quantum: QuantumForce::None, potential: pot.clone() };

    let model = PhaseSpaceModel::klein_kramers();
    let dt_pde = 0.9 * phasespace::phase_space_stable_dt(&psg, &params, &pot, &model);
    let dt_ens = 1e-3;
    let t_check = 0.4;
    let se = (2.0_f64 / n as f64).sqrt(); // relative χ² error of a variance

    let mut t = 0.0;
    for checkpoint in 1..=10 {
        let target = checkpoint as f64 * t_check;
        while t < target - 1e-12 {
            let step = dt_pde.min(target - t);
            w = phasespace::step_phase_space(&w, &params, &pot, step, &model).unwrap();
            t += step;
        }
        let steps_ens = (target / dt_ens).round() as usize
            - ((checkpoint - 1) as f64 * t_check / dt_ens).round() as usize;
        for _ in 0..steps_ens {
            langevin::step_ensemble(&mut ens, &params, &force, dt_ens).unwrap();
        }
        let (rho_x, _) = phasespace::marginals(&w).unwrap();
        let (_, var_pde) = rho_x.moments().unwrap();
        let stats = langevin::ensemble_statistics(&ens, &params, None, 32).unwrap();
        let band = 3.0 * se * var_pde + 2.0 * dt_ens;
        assert!(
            (stats.var_x - var_pde).abs() < band,
            "t = {target}: ensemble {} vs PDE {} (band {band:.4})",
            stats.var_x,
            var_pde
        );
    }
}

/// The phase-space histogram of a thermal equilibrium ensemble lands
/// on the Maxwell–Boltzmann density: L1 distance < 0.05 at N = 10⁵
/// with a 64×64 view.
#[test]
fn equilibrium_histogram_matches_maxwell_boltzmann() {
    let params = PhysicalParams::new(1.0, 1.0, 1.0, 1.0).unwrap();
    let pot = PotentialSpec::harmonic(1.0, 1.0);
    let grid = Grid1D::new(-6.0, 6.0, 64, Boundary::Periodic).unwrap();
    let psg = PhaseSpaceGrid::new(grid, 6.0, 64).unwrap();

    let n = 100_000;
    let spec = GaussianPhaseSpec::ground_state(&params, 1.0);
    let mut ens = langevin::sample_wigner_initial(&spec, n, 5150).unwrap();
    let force = ForceModel { thermal: true, quantum: QuantumForce::None, potential: pot.clone() };
    let dt = 2e-3;
    for _ in 0..(15.0_f64 / dt) as usize {
        langevin::step_ensemble(&mut ens, &params, &force, dt).unwrap();
    }
    let stats = langevin::ensemble_statistics(&ens, &params, Some(&psg), 32).unwrap();
    let histogram = stats.histogram.unwrap();
    let mb = phasespace::maxwell_boltzmann(&psg, &params, &pot).unwrap();
    let mut l1 = 0.0;
    for (h, w) in histogram.iter().zip(mb.values.iter()) {
        l1 += (h - w).abs();
    }
    l1 *= psg.x().dx() * psg.dp();
    assert!(l1 < 0.05, "histogram vs MB L1 distance {l1:.4}");
}
