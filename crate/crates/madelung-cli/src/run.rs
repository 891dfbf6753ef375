// Copyright 2026 Madelung Contributors
// SPDX-License-Identifier: Apache-2.0

//! Scenario execution: dispatch to a solver, collect a time series,
//! and write the CSV/JSON outputs atomically.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use madelung::diffusion::{self, SmoluchowskiOptions};
use madelung::field::{DensityField, WaveFunction};
use madelung::grid::{Boundary, Grid1D};
use madelung::kostin::{self, KostinOptions};
use madelung::langevin::{self, BandwidthRule, ForceModel, GaussianPhaseSpec, QuantumForce};
use madelung::oracle;
use madelung::phasespace::{self, PhaseSpaceGrid, PhaseSpaceModel, WignerField};
use madelung::Error as MadelungError;

use crate::config::{fmt_f64, InitKind, QuantumForceKind, Scenario, Solver};
use crate::output::{flat_binary, OutputStage};
use crate::CliError;

/// Machine-readable run record written as `summary.json`.
#[derive(Debug, Serialize)]
pub struct Summary {
    pub solver: String,
    pub seed: u64,
    pub config_sha256: String,
    pub wall_time_s: f64,
    pub rows: usize,
    pub columns: Vec<String>,
    pub r#final: serde_json::Map<String, serde_json::Value>,
    pub diagnostics: serde_json::Map<String, serde_json::Value>,
}

pub struct RunArtifacts {
    pub output_dir: PathBuf,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

fn solver_error(e: MadelungError) -> CliError {
    CliError::Numerical(e.to_string())
}

fn config_error(e: MadelungError) -> CliError {
    CliError::Config(e.to_string())
}

fn json_f64(map: &mut serde_json::Map<String, serde_json::Value>, key: &str, value: f64) {
    map.insert(key.into(), serde_json::Value::from(value));
}

/// Resolve the output directory, honoring the environment override
/// for relative paths.
pub fn resolve_output_dir(configured: &str) -> PathBuf {
    let configured = Path::new(configured);
    if configured.is_absolute() {
        return configured.to_path_buf();
    }
    match std::env::var_os("MADELUNG_OUTPUT_ROOT") {
        Some(root) => Path::new(&root).join(configured),
        None => configured.to_path_buf(),
    }
}

pub fn run_scenario(scenario: &Scenario) -> Result<RunArtifacts, CliError> {
    let started = Instant::now();
    let output_dir = resolve_output_dir(&scenario.output_dir);
    let stage = OutputStage::new(&output_dir)?;

    let mut diagnostics = serde_json::Map::new();
    let mut finals = serde_json::Map::new();
    let (columns, rows) = match scenario.solver {
        Solver::Kostin => run_kostin(scenario, &stage, &mut finals, &mut diagnostics)?,
        Solver::Smoluchowski | Solver::NonlinearSmoluchowski => {
            run_smoluchowski(scenario, &stage, &mut finals, &mut diagnostics)?
        }
        Solver::PhaseSpace => run_phasespace(scenario, &stage, &mut finals, &mut diagnostics)?,
        Solver::Langevin => run_langevin(scenario, &stage, &mut finals, &mut diagnostics)?,
        Solver::Oracle => run_oracle_table(scenario, &mut finals)?,
    };

    let column_refs: Vec<&str> = columns.iter().map(|c| c.as_str()).collect();
    stage.write_csv("series.csv", &column_refs, &rows)?;
    stage.write_text("config.input.txt", &scenario.source_text)?;
    stage.write_text("config.resolved.txt", &scenario.resolved_text())?;

    let summary = Summary {
        solver: scenario.solver.name().to_string(),
        seed: scenario.seed,
        config_sha256: hex_digest(&scenario.source_text),
        wall_time_s: started.elapsed().as_secs_f64(),
        rows: rows.len(),
        columns: columns.clone(),
        r#final: finals,
        diagnostics,
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Io(format!("serializing summary: {e}")))?;
    stage.write_text("summary.json", &json)?;

    let output_dir = stage.commit()?;
    Ok(RunArtifacts { output_dir, columns, rows })
}

fn hex_digest(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn spatial_grid(scenario: &Scenario) -> Result<Grid1D, CliError> {
    Grid1D::new(scenario.x_min, scenario.x_max, scenario.n, Boundary::Periodic)
        .map_err(config_error)
}

fn cadence(scenario: &Scenario, steps_total: usize) -> usize {
    if scenario.cadence > 0 {
        scenario.cadence
    } else {
        (steps_total / 200).max(1)
    }
}

type Series = (Vec<String>, Vec<Vec<f64>>);

fn run_kostin(
    scenario: &Scenario,
    stage: &OutputStage,
    finals: &mut serde_json::Map<String, serde_json::Value>,
    diagnostics: &mut serde_json::Map<String, serde_json::Value>,
) -> Result<Series, CliError> {
    let grid = spatial_grid(scenario)?;
    let params = scenario.params;
    let psi0 = match scenario.init {
        InitKind::Gaussian | InitKind::GroundState => {
            let var = if scenario.init == InitKind::GroundState {
                params.hbar / (2.0 * params.mass * scenario.omega0)
            } else {
                scenario.init_var_x
            };
            WaveFunction::gaussian_packet(
                scenario.init_mean_x,
                var,
                scenario.init_mean_v,
                params.mass,
                params.hbar,
                &grid,
            )
            .map_err(config_error)?
        }
        InitKind::MaxwellBoltzmann => {
            return Err(CliError::Config(
                "init = maxwell_boltzmann is a phase-space initial condition".into(),
            ))
        }
    };
    let bound = kostin::kostin_stable_dt(&grid, &params);
    let dt = scenario.dt.unwrap_or(0.5 * bound);
    let steps_total = (scenario.t_max / dt).round().max(1.0) as usize;
    let opts = KostinOptions {
        t_max: scenario.t_max,
        dt,
        record_every: cadence(scenario, steps_total),
        keep_snapshots: false,
    };
    let record =
        kostin::evolve_kostin(&psi0, &params, &scenario.potential, opts).map_err(solver_error)?;

    if scenario.snapshots {
        // Final-state export: x, Re ψ, Im ψ, ρ, S, V.
        let mut psi = psi0;
        for _ in 0..steps_total {
            psi = kostin::step_kostin(&psi, &params, &scenario.potential, dt)
                .map_err(solver_error)?;
        }
        let fields = kostin::madelung_decompose(&psi, &params).map_err(solver_error)?;
        let rows: Vec<Vec<f64>> = (0..grid.n())
            .map(|i| {
                vec![
                    grid.node(i),
                    psi.values()[i].re,
                    psi.values()[i].im,
                    fields.rho.values()[i],
                    fields.action[i],
                    fields.velocity[i],
                ]
            })
            .collect();
        stage.write_csv(
            "snapshot.csv",
            &["x", "re_psi", "im_psi", "rho", "action", "velocity"],
            &rows,
        )?;
    }

    let columns =
        vec!["t".to_string(), "norm".into(), "mean_x".into(), "variance".into(), "mean_p".into(), "energy".into()];
    let rows: Vec<Vec<f64>> = (0..record.times.len())
        .map(|k| {
            vec![
                record.times[k],
                record.norms[k],
                record.mean_x[k],
                record.variance[k],
                record.mean_p[k],
                record.energy[k],
            ]
        })
        .collect();
    json_f64(finals, "variance", *record.variance.last().unwrap());
    json_f64(finals, "mean_x", *record.mean_x.last().unwrap());
    json_f64(finals, "energy", *record.energy.last().unwrap());
    json_f64(diagnostics, "norm_drift", (record.norms.last().unwrap() - 1.0).abs());
    json_f64(diagnostics, "dt", dt);
    Ok((columns, rows))
}

fn run_smoluchowski(
    scenario: &Scenario,
    stage: &OutputStage,
    finals: &mut serde_json::Map<String, serde_json::Value>,
    diagnostics: &mut serde_json::Map<String, serde_json::Value>,
) -> Result<Series, CliError> {
    let grid = spatial_grid(scenario)?;
    let params = scenario.params;
    let var0 = match scenario.init {
        InitKind::GroundState => params.hbar / (2.0 * params.mass * scenario.omega0),
        _ => scenario.init_var_x,
    };
    let rho0 =
        DensityField::gaussian(scenario.init_mean_x, var0, &grid).map_err(config_error)?;

    let (series, final_rho) = if scenario.solver == Solver::Smoluchowski {
        let opts = SmoluchowskiOptions {
            t_max: scenario.t_max,
            dt: scenario.dt,
            checkpoints: if scenario.cadence > 0 { scenario.cadence } else { 100 },
        };
        diffusion::evolve_smoluchowski(&rho0, &params, &scenario.potential, opts)
            .map_err(solver_error)?
    } else {
        // Nonlinear variant: explicit loop at the stability bound.
        let bound = diffusion::smoluchowski_stable_dt(&rho0, &params, &scenario.potential)
            .map_err(config_error)?;
        let dt = scenario.dt.unwrap_or(bound);
        let steps_total = (scenario.t_max / dt).ceil() as usize;
        let record_every =
            (steps_total / if scenario.cadence > 0 { scenario.cadence } else { 100 }).max(1);
        let mut rho = rho0.clone();
        let mut series = diffusion::DispersionSeries {
            times: vec![0.0],
            sigma2: vec![rho.moments().map_err(solver_error)?.1],
            source: diffusion::SeriesSource::Pde,
        };
        for s in 1..=steps_total {
            rho = diffusion::step_nonlinear_smoluchowski(
                &rho,
                &params,
                &scenario.potential,
                dt,
                scenario.beta_nodes,
            )
            .map_err(solver_error)?;
            if s % record_every == 0 || s == steps_total {
                series.times.push(s as f64 * dt);
                series.sigma2.push(rho.moments().map_err(solver_error)?.1);
            }
        }
        (series, rho)
    };

    if scenario.snapshots {
        let rows: Vec<Vec<f64>> = (0..grid.n())
            .map(|i| vec![grid.node(i), final_rho.values()[i]])
            .collect();
        stage.write_csv("snapshot.csv", &["x", "rho"], &rows)?;
    }

    let source = series.source.label();
    let columns = vec!["t".to_string(), "sigma2".into()];
    let rows: Vec<Vec<f64>> = series
        .times
        .iter()
        .zip(series.sigma2.iter())
        .map(|(t, s)| vec![*t, *s])
        .collect();
    json_f64(finals, "sigma2", *series.sigma2.last().unwrap());
    json_f64(diagnostics, "mass_error", (final_rho.mass() - 1.0).abs());
    diagnostics.insert("series_source".into(), serde_json::Value::from(source));
    Ok((columns, rows))
}

fn build_initial_wigner(
    scenario: &Scenario,
    psg: &PhaseSpaceGrid,
) -> Result<WignerField, CliError> {
    let params = scenario.params;
    match scenario.init {
        InitKind::MaxwellBoltzmann => {
            phasespace::maxwell_boltzmann(psg, &params, &scenario.potential).map_err(config_error)
        }
        InitKind::Gaussian | InitKind::GroundState => {
            let var = if scenario.init == InitKind::GroundState {
                params.hbar / (2.0 * params.mass * scenario.omega0)
            } else {
                scenario.init_var_x
            };
            let psi = WaveFunction::gaussian_packet(
                scenario.init_mean_x,
                var,
                scenario.init_mean_v,
                params.mass,
                params.hbar,
                psg.x(),
            )
            .map_err(config_error)?;
            let w = phasespace::wigner_transform(&psi, &params).map_err(config_error)?;
            if w.grid.n_p() != psg.n_p() || (w.grid.p_max() - psg.p_max()).abs() > 1e-12 {
                return Err(CliError::Config(format!(
                    "wigner initial conditions require the natural p-grid: n_p = {}, p_max = {}",
                    w.grid.n_p(),
                    fmt_f64(w.grid.p_max()),
                )));
            }
            Ok(w)
        }
    }
}

fn run_phasespace(
    scenario: &Scenario,
    stage: &OutputStage,
    finals: &mut serde_json::Map<String, serde_json::Value>,
    diagnostics: &mut serde_json::Map<String, serde_json::Value>,
) -> Result<Series, CliError> {
    let grid = spatial_grid(scenario)?;
    let params = scenario.params;
    let psg = match scenario.p_max {
        Some(p_max) => PhaseSpaceGrid::new(grid, p_max, scenario.n_p).map_err(config_error)?,
        None => PhaseSpaceGrid::wigner_natural(&grid, params.hbar).map_err(config_error)?,
    };
    let model = PhaseSpaceModel {
        quantum: scenario.quantum,
        friction: scenario.friction,
        x_model: scenario.x_model,
    };
    let mut w = build_initial_wigner(scenario, &psg)?;
    w.check_p_boundary().map_err(config_error)?;

    let bound =
        phasespace::phase_space_stable_dt(&psg, &params, &scenario.potential, &model);
    let dt = scenario.dt.unwrap_or(0.9 * bound);
    let steps_total = (scenario.t_max / dt).ceil() as usize;
    let record_every = cadence(scenario, steps_total);

    let observe = |w: &WignerField| -> Result<Vec<f64>, CliError> {
        let (rho_x, _) = phasespace::marginals(w).map_err(solver_error)?;
        let (mean, var) = rho_x.moments().map_err(solver_error)?;
        Ok(vec![w.time, w.total_mass(), mean, var, w.kinetic_energy(&params)])
    };
    let columns = vec![
        "t".to_string(),
        "mass".into(),
        "mean_x".into(),
        "var_x".into(),
        "kinetic_energy".into(),
    ];
    let mut rows = vec![observe(&w)?];
    for s in 1..=steps_total {
        w = phasespace::step_phase_space(&w, &params, &scenario.potential, dt, &model)
            .map_err(solver_error)?;
        if s % record_every == 0 || s == steps_total {
            w.check_p_boundary().map_err(solver_error)?;
            rows.push(observe(&w)?);
        }
    }

    if scenario.snapshots {
        stage.write_bytes(
            "snapshot.bin",
            &flat_binary((psg.n_x(), psg.n_p()), w.values.iter().cloned()),
        )?;
        let mut csv_rows = Vec::with_capacity(psg.n_x() * psg.n_p());
        for i in 0..psg.n_x() {
            for j in 0..psg.n_p() {
                csv_rows.push(vec![psg.x().node(i), psg.p_node(j), w.values[[i, j]]]);
            }
        }
        stage.write_csv("snapshot.csv", &["x", "p", "w"], &csv_rows)?;
    }

    let last = rows.last().unwrap();
    json_f64(finals, "var_x", last[3]);
    json_f64(finals, "kinetic_energy", last[4]);
    json_f64(diagnostics, "mass_error", (last[1] - 1.0).abs());
    json_f64(diagnostics, "dt", dt);
    Ok((columns, rows))
}

fn run_langevin(
    scenario: &Scenario,
    stage: &OutputStage,
    finals: &mut serde_json::Map<String, serde_json::Value>,
    diagnostics: &mut serde_json::Map<String, serde_json::Value>,
) -> Result<Series, CliError> {
    let params = scenario.params;
    let spec = match scenario.init {
        InitKind::GroundState => GaussianPhaseSpec::ground_state(&params, scenario.omega0)
            .displaced(scenario.init_mean_x, scenario.init_mean_v),
        _ => GaussianPhaseSpec {
            mean_x: scenario.init_mean_x,
            var_x: scenario.init_var_x,
            mean_v: scenario.init_mean_v,
            var_v: scenario.init_var_v,
            cov: scenario.init_cov,
        },
    };
    let mut ens = langevin::sample_wigner_initial(&spec, scenario.n_particles, scenario.seed)
        .map_err(config_error)?;
    let force = ForceModel {
        thermal: scenario.thermal,
        quantum: match scenario.quantum_force {
            QuantumForceKind::None => QuantumForce::None,
            QuantumForceKind::MeanField => QuantumForce::MeanField(match scenario.bandwidth {
                Some(h) => BandwidthRule::Fixed(h),
                None => BandwidthRule::Silverman,
            }),
        },
        potential: scenario.potential.clone(),
    };
    let dt = scenario.dt.unwrap_or(1e-3);
    let steps_total = (scenario.t_max / dt).ceil() as usize;
    let record_every = cadence(scenario, steps_total);

    let columns = vec![
        "t".to_string(),
        "mean_x".into(),
        "var_x".into(),
        "mean_v".into(),
        "var_v".into(),
    ];
    let observe = |ens: &langevin::TrajectoryEnsemble| -> Result<Vec<f64>, CliError> {
        let stats = langevin::ensemble_statistics(ens, &params, None, 32).map_err(solver_error)?;
        Ok(vec![ens.time(), stats.mean_x, stats.var_x, stats.mean_v, stats.var_v])
    };
    let mut rows = vec![observe(&ens)?];
    let mut extrapolated_total = 0usize;
    for s in 1..=steps_total {
        let diag = langevin::step_ensemble(&mut ens, &params, &force, dt).map_err(solver_error)?;
        extrapolated_total += diag.extrapolated;
        if s % record_every == 0 || s == steps_total {
            rows.push(observe(&ens)?);
        }
    }

    if scenario.snapshots {
        let particle_rows: Vec<Vec<f64>> = (0..ens.len())
            .map(|i| vec![i as f64, ens.positions[i], ens.velocities[i]])
            .collect();
        stage.write_csv("particles.csv", &["id", "x", "v"], &particle_rows)?;
    }

    let last = rows.last().unwrap();
    json_f64(finals, "var_x", last[2]);
    json_f64(finals, "var_v", last[4]);
    json_f64(diagnostics, "extrapolated_force_evaluations", extrapolated_total as f64);
    json_f64(diagnostics, "dt", dt);
    Ok((columns, rows))
}

/// Reference tables for the oracle subcommand and `solver = oracle`
/// scenarios.
pub fn oracle_table(
    name: &str,
    params: &madelung::PhysicalParams,
    omega0: f64,
    t_max: f64,
    points: usize,
) -> Result<Series, CliError> {
    if points < 2 {
        return Err(CliError::Config("oracle tables need points >= 2".into()));
    }
    let pot = if omega0 > 0.0 {
        madelung::potential::PotentialSpec::harmonic(params.mass, omega0)
    } else {
        madelung::potential::PotentialSpec::free()
    };
    let mut rows = Vec::with_capacity(points);
    for k in 0..points {
        let t = t_max * k as f64 / (points - 1) as f64;
        let value = match name {
            "commutator" => oracle::commutator_factor(params, &pot, t).map_err(config_error)?,
            "free_quantum" => {
                oracle::free_quantum_dispersion(t, params).map_err(config_error)?
            }
            "einstein" => oracle::einstein_dispersion(t, params).map_err(config_error)?,
            "harmonic_dispersion" => {
                diffusion::dispersion_harmonic(t, params, omega0).map_err(config_error)?
            }
            "implicit_dispersion" => {
                diffusion::dispersion_free_implicit(t, params).map_err(config_error)?
            }
            "ground_sigma2" => params.hbar / (2.0 * params.mass * omega0),
            "classical_sigma2" => {
                params.kt / (params.mass * omega0 * omega0)
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown oracle `{other}`; expected commutator | free_quantum | einstein | \
                     harmonic_dispersion | implicit_dispersion | ground_sigma2 | classical_sigma2"
                )))
            }
        };
        rows.push(vec![t, value]);
    }
    Ok((vec!["t".to_string(), "value".into()], rows))
}

fn run_oracle_table(
    scenario: &Scenario,
    finals: &mut serde_json::Map<String, serde_json::Value>,
) -> Result<Series, CliError> {
    let (columns, rows) = oracle_table(
        &scenario.oracle_name,
        &scenario.params,
        scenario.omega0,
        scenario.t_max,
        scenario.points,
    )?;
    json_f64(finals, "value", rows.last().unwrap()[1]);
    Ok((columns, rows))
}
