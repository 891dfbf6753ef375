// Copyright 2026 Madelung Contributors
// SPDX-License-Identifier: Apache-2.0

//! Parameter sweeps with per-value error metrics against a named
//! reference curve and a fitted convergence order for resolution axes.

use std::path::Path;

use serde::Serialize;

use madelung::{diffusion, oracle};

use crate::config::{parse_config, Scenario};
use crate::output::OutputStage;
use crate::run::{resolve_output_dir, run_scenario};
use crate::CliError;

#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub output_dir: String,
    pub final_observable: f64,
    pub error: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct SweepReport {
    pub axis: String,
    pub compare: Option<String>,
    pub points: Vec<SweepPoint>,
    /// Least-squares order of error against the axis, for axes that
    /// refine a resolution (n) or a step (dt).
    pub fitted_order: Option<f64>,
}

/// Apply an axis override to the raw config text: replaces the key's
/// line or appends one.
fn override_key(text: &str, key: &str, value: &str) -> String {
    let mut out = String::new();
    let mut replaced = false;
    for line in text.lines() {
        let stripped = line.split('#').next().unwrap_or("");
        let is_key = stripped
            .split_once('=')
            .map(|(k, _)| k.trim() == key)
            .unwrap_or(false);
        if is_key {
            out.push_str(&format!("{key} = {value}\n"));
            replaced = true;
        } else {
            out.push_str(line);
            out.push('\n');
        }
    }
    if !replaced {
        out.push_str(&format!("{key} = {value}\n"));
    }
    out
}

/// Final-time σ² (or the solver's main observable) from a finished
/// run's series.
fn final_observable(columns: &[String], rows: &[Vec<f64>]) -> Result<(f64, f64), CliError> {
    let last = rows
        .last()
        .ok_or_else(|| CliError::Numerical("sweep run produced an empty series".into()))?;
    // Column 0 is always time; prefer a sigma2/var_x column, else the
    // second column.
    let idx = columns
        .iter()
        .position(|c| c == "sigma2" || c == "var_x" || c == "variance")
        .unwrap_or(1);
    Ok((last[0], last[idx]))
}

fn reference_value(label: &str, scenario: &Scenario, t: f64) -> Result<f64, CliError> {
    let params = &scenario.params;
    match label {
        "einstein" => oracle::einstein_dispersion(t, params)
            .map(|v| v + scenario.init_var_x)
            .map_err(|e| CliError::Config(e.to_string())),
        "free_quantum" => oracle::free_quantum_dispersion(t, params)
            .map_err(|e| CliError::Config(e.to_string())),
        "harmonic_dispersion" => diffusion::dispersion_harmonic(t, params, scenario.omega0)
            .map_err(|e| CliError::Config(e.to_string())),
        "implicit_dispersion" => diffusion::dispersion_free_implicit(t, params)
            .map_err(|e| CliError::Config(e.to_string())),
        "sigma_ode" => {
            let rhs = |_t: f64, y: f64| {
                diffusion::gaussian_sigma_ode_rhs(y, params, &scenario.potential)
                    .unwrap_or(f64::NAN)
            };
            let v = oracle::rk4_scalar(rhs, scenario.init_var_x, 0.0, t, 4000);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::Config("sigma_ode oracle needs a free or harmonic potential".into()))
            }
        }
        "equipartition" => {
            let curvature = scenario.potential.derivative_at(0.0, 2);
            if curvature <= 0.0 || params.kt <= 0.0 {
                return Err(CliError::Config(
                    "equipartition oracle needs a harmonic potential and kT > 0".into(),
                ));
            }
            Ok(params.kt / curvature)
        }
        other => Err(CliError::Config(format!(
            "unknown comparison oracle `{other}`; expected einstein | free_quantum | \
             harmonic_dispersion | implicit_dispersion | sigma_ode | equipartition"
        ))),
    }
}

pub fn run_sweep(
    base_text: &str,
    axis_key: &str,
    axis_values: &[String],
    compare: Option<&str>,
    report_dir: &str,
) -> Result<SweepReport, CliError> {
    if axis_values.is_empty() {
        return Err(CliError::Config("sweep axis needs at least one value".into()));
    }
    let mut points = Vec::new();
    for value in axis_values {
        let text = override_key(base_text, axis_key, value);
        let sub_dir = format!("{report_dir}/{axis_key}={value}");
        let text = override_key(&text, "output_dir", &sub_dir);
        let scenario = parse_config(&text)?;
        let artifacts = run_scenario(&scenario)?;
        let (t_final, observable) = final_observable(&artifacts.columns, &artifacts.rows)?;
        let error = match compare {
            None => None,
            Some(label) => {
                let reference = reference_value(label, &scenario, t_final)?;
                Some(((observable - reference) / reference).abs())
            }
        };
        let numeric_value: f64 = value
            .parse()
            .map_err(|e| CliError::Config(format!("axis value `{value}`: {e}")))?;
        points.push(SweepPoint {
            value: numeric_value,
            output_dir: artifacts.output_dir.display().to_string(),
            final_observable: observable,
            error,
        });
    }

    // A fitted order only makes sense for resolution-like axes with
    // errors available.
    let fitted_order = if matches!(axis_key, "n" | "dt" | "n_p" | "n_particles")
        && points.len() >= 2
        && points.iter().all(|p| p.error.map(|e| e > 0.0).unwrap_or(false))
    {
        let xs: Vec<f64> = points.iter().map(|p| p.value.ln()).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.error.unwrap().ln()).collect();
        let n = xs.len() as f64;
        let xbar = xs.iter().sum::<f64>() / n;
        let ybar = ys.iter().sum::<f64>() / n;
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
        let den: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
        // For n-like axes error falls as value grows: report the
        // positive order; for dt it falls as dt shrinks.
        let slope = num / den;
        Some(if axis_key == "dt" { slope } else { -slope })
    } else {
        None
    };

    let report = SweepReport {
        axis: axis_key.to_string(),
        compare: compare.map(|s| s.to_string()),
        points,
        fitted_order,
    };

    // Report files land next to the per-value run directories.
    let root = resolve_output_dir(report_dir);
    std::fs::create_dir_all(&root)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", root.display())))?;
    let stage = OutputStage::new(&root.join("report"))?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Io(format!("serializing report: {e}")))?;
    stage.write_text("report.json", &json)?;
    let rows: Vec<Vec<f64>> = report
        .points
        .iter()
        .map(|p| vec![p.value, p.final_observable, p.error.unwrap_or(f64::NAN)])
        .collect();
    stage.write_csv("report.csv", &["value", "final_observable", "error"], &rows)?;
    stage.commit()?;
    Ok(report)
}

/// `compare` subcommand: per-column metric between two CSV series.
#[derive(Debug, Serialize)]
pub struct CompareReport {
    pub rows: usize,
    pub columns: Vec<String>,
    pub metric: String,
    pub per_column: Vec<f64>,
    pub worst: f64,
}

pub fn compare_csv(a: &Path, b: &Path, metric: &str) -> Result<CompareReport, CliError> {
    let (header_a, rows_a) = crate::output::read_csv(a)?;
    let (header_b, rows_b) = crate::output::read_csv(b)?;
    if header_a != header_b {
        return Err(CliError::Config(format!(
            "column mismatch: {header_a:?} vs {header_b:?}"
        )));
    }
    if rows_a.len() != rows_b.len() {
        return Err(CliError::Config(format!(
            "row count mismatch: {} vs {}",
            rows_a.len(),
            rows_b.len()
        )));
    }
    if !matches!(metric, "l1" | "linf") {
        return Err(CliError::Config(format!("unknown metric `{metric}`; expected l1 | linf")));
    }
    let cols = header_a.len();
    let mut per_column = vec![0.0_f64; cols];
    for (ra, rb) in rows_a.iter().zip(rows_b.iter()) {
        for c in 0..cols {
            let d = (ra[c] - rb[c]).abs();
            match metric {
                "l1" => per_column[c] += d,
                _ => per_column[c] = per_column[c].max(d),
            }
        }
    }
    if metric == "l1" && !rows_a.is_empty() {
        for v in per_column.iter_mut() {
            *v /= rows_a.len() as f64;
        }
    }
    let worst = per_column.iter().cloned().fold(0.0_f64, f64::max);
    Ok(CompareReport {
        rows: rows_a.len(),
        columns: header_a,
        metric: metric.to_string(),
        per_column,
        worst,
    })
}
