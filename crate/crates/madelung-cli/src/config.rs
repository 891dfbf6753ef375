// Copyright 2026 Madelung Contributors
// SPDX-License-Identifier: Apache-2.0

//! Plain-text `key = value` scenario configs.
//!
//! The format is deliberately flat: one key per line, `#` comments,
//! no sections. That keeps byte-exact echoing and hashing trivial, and
//! every parse error can point at a key and a line number. Unknown
//! keys are hard errors.

use std::collections::BTreeMap;
use std::fmt;

use madelung::phasespace::XModel;
use madelung::potential::PotentialSpec;
use madelung::PhysicalParams;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Kostin,
    Smoluchowski,
    NonlinearSmoluchowski,
    PhaseSpace,
    Langevin,
    Oracle,
}

impl Solver {
    pub fn name(&self) -> &'static str {
        match self {
            Solver::Kostin => "kostin",
            Solver::Smoluchowski => "smoluchowski",
            Solver::NonlinearSmoluchowski => "nonlinear_smoluchowski",
            Solver::PhaseSpace => "phasespace",
            Solver::Langevin => "langevin",
            Solver::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Gaussian,
    GroundState,
    MaxwellBoltzmann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantumForceKind {
    None,
    MeanField,
}

/// Fully resolved scenario. Every field is validated before any
/// computation starts.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub solver: Solver,
    pub params: PhysicalParams,
    pub potential: PotentialSpec,
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    pub p_max: Option<f64>,
    pub n_p: usize,
    pub init: InitKind,
    pub init_mean_x: f64,
    pub init_var_x: f64,
    pub init_mean_v: f64,
    pub init_var_v: f64,
    pub init_cov: f64,
    pub dt: Option<f64>,
    pub t_max: f64,
    pub cadence: usize,
    pub seed: u64,
    pub n_particles: usize,
    pub quantum: bool,
    pub friction: bool,
    pub x_model: XModel,
    pub thermal: bool,
    pub quantum_force: QuantumForceKind,
    pub bandwidth: Option<f64>,
    pub beta_nodes: usize,
    pub oracle_name: String,
    pub omega0: f64,
    pub points: usize,
    pub snapshots: bool,
    pub output_dir: String,
    /// Verbatim input text (echoed next to the outputs and hashed).
    pub source_text: String,
}

impl Scenario {
    /// Sorted `key = value` rendering of the resolved scenario.
    pub fn resolved_text(&self) -> String {
        let mut kv: BTreeMap<&str, String> = BTreeMap::new();
        kv.insert("solver", self.solver.name().into());
        kv.insert("mass", fmt_f64(self.params.mass));
        kv.insert("friction_coefficient", fmt_f64(self.params.friction));
        kv.insert("kt", fmt_f64(self.params.kt));
        kv.insert("hbar", fmt_f64(self.params.hbar));
        kv.insert(
            "potential",
            self.potential.coeffs().iter().map(|c| fmt_f64(*c)).collect::<Vec<_>>().join(","),
        );
        kv.insert("x_min", fmt_f64(self.x_min));
        kv.insert("x_max", fmt_f64(self.x_max));
        kv.insert("n", self.n.to_string());
        if let Some(p) = self.p_max {
            kv.insert("p_max", fmt_f64(p));
        }
        kv.insert("n_p", self.n_p.to_string());
        kv.insert(
            "init",
            match self.init {
                InitKind::Gaussian => "gaussian",
                InitKind::GroundState => "ground_state",
                InitKind::MaxwellBoltzmann => "maxwell_boltzmann",
            }
            .into(),
        );
        kv.insert("init_mean_x", fmt_f64(self.init_mean_x));
        kv.insert("init_var_x", fmt_f64(self.init_var_x));
        kv.insert("init_mean_v", fmt_f64(self.init_mean_v));
        kv.insert("init_var_v", fmt_f64(self.init_var_v));
        kv.insert("init_cov", fmt_f64(self.init_cov));
        if let Some(dt) = self.dt {
            kv.insert("dt", fmt_f64(dt));
        }
        kv.insert("t_max", fmt_f64(self.t_max));
        kv.insert("cadence", self.cadence.to_string());
        kv.insert("seed", self.seed.to_string());
        kv.insert("n_particles", self.n_particles.to_string());
        kv.insert("quantum", self.quantum.to_string());
        kv.insert("friction", self.friction.to_string());
        kv.insert(
            "x_model",
            match self.x_model {
                XModel::None => "none",
                XModel::Coffey => "coffey",
                XModel::GaussianNonlinear => "gaussian_nonlinear",
            }
            .into(),
        );
        kv.insert("thermal", self.thermal.to_string());
        kv.insert(
            "quantum_force",
            match self.quantum_force {
                QuantumForceKind::None => "none",
                QuantumForceKind::MeanField => "meanfield",
            }
            .into(),
        );
        if let Some(h) = self.bandwidth {
            kv.insert("bandwidth", fmt_f64(h));
        }
        kv.insert("beta_nodes", self.beta_nodes.to_string());
        if self.solver == Solver::Oracle {
            kv.insert("oracle_name", self.oracle_name.clone());
        }
        kv.insert("omega0", fmt_f64(self.omega0));
        kv.insert("points", self.points.to_string());
        kv.insert("snapshots", self.snapshots.to_string());
        kv.insert("output_dir", self.output_dir.clone());
        let mut out = String::new();
        for (k, v) in kv {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct RawEntry {
    value: String,
    line: usize,
    used: bool,
}

struct RawConfig {
    entries: BTreeMap<String, RawEntry>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {line_no}: expected `key = value`, got `{line}`"))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(CliError::Config(format!(
                    "line {line_no}: empty key or value in `{line}`"
                )));
            }
            if entries
                .insert(key.clone(), RawEntry { value, line: line_no, used: false })
                .is_some()
            {
                return Err(CliError::Config(format!("line {line_no}: duplicate key `{key}`")));
            }
        }
        Ok(Self { entries })
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.value.clone(), e.line)
        })
    }

    fn parse_with<T, F: FnOnce(&str) -> Result<T, String>>(
        &mut self,
        key: &str,
        default: T,
        f: F,
    ) -> Result<T, CliError> {
        match self.take(key) {
            None => Ok(default),
            Some((value, line)) => f(&value).map_err(|msg| {
                CliError::Config(format!("line {line}: key `{key}`: {msg} (got `{value}`)"))
            }),
        }
    }

    fn f64_key(&mut self, key: &str, default: f64) -> Result<f64, CliError> {
        self.parse_with(key, default, |v| v.parse::<f64>().map_err(|e| e.to_string()))
    }

    fn usize_key(&mut self, key: &str, default: usize) -> Result<usize, CliError> {
        self.parse_with(key, default, |v| v.parse::<usize>().map_err(|e| e.to_string()))
    }

    fn u64_key(&mut self, key: &str, default: u64) -> Result<u64, CliError> {
        self.parse_with(key, default, |v| v.parse::<u64>().map_err(|e| e.to_string()))
    }

    fn bool_key(&mut self, key: &str, default: bool) -> Result<bool, CliError> {
        self.parse_with(key, default, |v| match v {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err("expected true or false".into()),
        })
    }

    fn string_key(&mut self, key: &str, default: &str) -> Result<String, CliError> {
        self.parse_with(key, default.to_string(), |v| Ok(v.to_string()))
    }

    fn reject_unused(&self) -> Result<(), CliError> {
        for (key, entry) in &self.entries {
            if !entry.used {
                return Err(CliError::Config(format!(
                    "line {}: unknown key `{key}`",
                    entry.line
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parse and validate a scenario document.
pub fn parse_config(text: &str) -> Result<Scenario, CliError> {
    let mut raw = RawConfig::parse(text)?;

    let solver = raw.parse_with("solver", None, |v| match v {
        "kostin" => Ok(Some(Solver::Kostin)),
        "smoluchowski" => Ok(Some(Solver::Smoluchowski)),
        "nonlinear_smoluchowski" => Ok(Some(Solver::NonlinearSmoluchowski)),
        "phasespace" => Ok(Some(Solver::PhaseSpace)),
        "langevin" => Ok(Some(Solver::Langevin)),
        "oracle" => Ok(Some(Solver::Oracle)),
        _ => Err("unknown solver".into()),
    })?;
    let solver =
        solver.ok_or_else(|| CliError::Config("missing required key `solver`".into()))?;

    let mass = raw.f64_key("mass", 1.0)?;
    let friction_coeff = raw.f64_key("friction_coefficient", 0.0)?;
    let kt = raw.f64_key("kt", 0.0)?;
    let hbar = raw.f64_key("hbar", 1.0)?;
    let params = PhysicalParams::new(mass, friction_coeff, kt, hbar)
        .map_err(|e| CliError::Config(format!("physical parameters: {e}")))?;

    let potential = raw.parse_with("potential", PotentialSpec::free(), |v| {
        let coeffs: Result<Vec<f64>, _> =
            v.split(',').map(|c| c.trim().parse::<f64>()).collect();
        let coeffs = coeffs.map_err(|e| e.to_string())?;
        PotentialSpec::from_coeffs(coeffs).map_err(|e| e.to_string())
    })?;

    let x_min = raw.f64_key("x_min", -8.0)?;
    let x_max = raw.f64_key("x_max", 8.0)?;
    let n = raw.usize_key("n", 256)?;
    let p_max = match raw.take("p_max") {
        None => None,
        Some((v, line)) => Some(v.parse::<f64>().map_err(|e| {
            CliError::Config(format!("line {line}: key `p_max`: {e} (got `{v}`)"))
        })?),
    };
    let n_p = raw.usize_key("n_p", 128)?;

    let init = raw.parse_with("init", InitKind::Gaussian, |v| match v {
        "gaussian" => Ok(InitKind::Gaussian),
        "ground_state" => Ok(InitKind::GroundState),
        "maxwell_boltzmann" => Ok(InitKind::MaxwellBoltzmann),
        _ => Err("expected gaussian | ground_state | maxwell_boltzmann".into()),
    })?;
    let init_mean_x = raw.f64_key("init_mean_x", 0.0)?;
    let init_var_x = raw.f64_key("init_var_x", 0.5)?;
    let init_mean_v = raw.f64_key("init_mean_v", 0.0)?;
    let init_var_v = raw.f64_key("init_var_v", 0.5)?;
    let init_cov = raw.f64_key("init_cov", 0.0)?;

    let dt = match raw.take("dt") {
        None => None,
        Some((v, line)) => Some(v.parse::<f64>().map_err(|e| {
            CliError::Config(format!("line {line}: key `dt`: {e} (got `{v}`)"))
        })?),
    };
    let t_max = raw.f64_key("t_max", 1.0)?;
    let cadence = raw.usize_key("cadence", 0)?;
    let seed = raw.u64_key("seed", 0)?;
    let n_particles = raw.usize_key("n_particles", 10_000)?;

    let quantum = raw.bool_key("quantum", true)?;
    let friction = raw.bool_key("friction", false)?;
    let x_model = raw.parse_with("x_model", XModel::None, |v| match v {
        "none" => Ok(XModel::None),
        "coffey" => Ok(XModel::Coffey),
        "gaussian_nonlinear" => Ok(XModel::GaussianNonlinear),
        _ => Err("expected none | coffey | gaussian_nonlinear".into()),
    })?;
    let thermal = raw.bool_key("thermal", false)?;
    let quantum_force = raw.parse_with("quantum_force", QuantumForceKind::None, |v| match v {
        "none" => Ok(QuantumForceKind::None),
        "meanfield" => Ok(QuantumForceKind::MeanField),
        _ => Err("expected none | meanfield".into()),
    })?;
    let bandwidth = match raw.take("bandwidth") {
        None => None,
        Some((v, line)) => {
            if v == "silverman" {
                None
            } else {
                Some(v.parse::<f64>().map_err(|e| {
                    CliError::Config(format!("line {line}: key `bandwidth`: {e} (got `{v}`)"))
                })?)
            }
        }
    };
    let beta_nodes = raw.usize_key("beta_nodes", 1)?;
    let oracle_name = raw.string_key("oracle_name", "")?;
    let omega0 = raw.f64_key("omega0", 1.0)?;
    let points = raw.usize_key("points", 50)?;
    let snapshots = raw.bool_key("snapshots", false)?;
    let output_dir = raw.string_key("output_dir", "out")?;

    raw.reject_unused()?;

    // Cross-field constraints.
    if !(t_max > 0.0) {
        return Err(CliError::Config("t_max must be > 0".into()));
    }
    if let Some(dt) = dt {
        if !(dt > 0.0) {
            return Err(CliError::Config("dt must be > 0".into()));
        }
    }
    match solver {
        Solver::Smoluchowski | Solver::NonlinearSmoluchowski => {
            if params.friction <= 0.0 {
                return Err(CliError::Config(format!(
                    "solver = {solver} requires friction_coefficient > 0"
                )));
            }
        }
        Solver::PhaseSpace => {
            if friction && params.friction <= 0.0 {
                return Err(CliError::Config(
                    "friction = true requires friction_coefficient > 0".into(),
                ));
            }
            if x_model == XModel::Coffey && params.kt <= 0.0 {
                return Err(CliError::Config("x_model = coffey requires kt > 0".into()));
            }
            if init == InitKind::MaxwellBoltzmann && params.kt <= 0.0 {
                return Err(CliError::Config(
                    "init = maxwell_boltzmann requires kt > 0".into(),
                ));
            }
        }
        Solver::Langevin => {
            if thermal && params.friction <= 0.0 {
                return Err(CliError::Config(
                    "thermal = true requires friction_coefficient > 0".into(),
                ));
            }
            if n_particles == 0 {
                return Err(CliError::Config("n_particles must be >= 1".into()));
            }
        }
        Solver::Oracle => {
            if oracle_name.is_empty() {
                return Err(CliError::Config(
                    "solver = oracle requires oracle_name".into(),
                ));
            }
        }
        Solver::Kostin => {}
    }
    if solver == Solver::NonlinearSmoluchowski && beta_nodes == 0 {
        return Err(CliError::Config("beta_nodes must be >= 1".into()));
    }

    Ok(Scenario {
        solver,
        params,
        potential,
        x_min,
        x_max,
        n,
        p_max,
        n_p,
        init,
        init_mean_x,
        init_var_x,
        init_mean_v,
        init_var_v,
        init_cov,
        dt,
        t_max,
        cadence,
        seed,
        n_particles,
        quantum,
        friction,
        x_model,
        thermal,
        quantum_force,
        bandwidth,
        beta_nodes,
        oracle_name,
        omega0,
        points,
        snapshots,
        output_dir,
        source_text: text.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let s = parse_config("solver = kostin\n").unwrap();
        assert_eq!(s.solver, Solver::Kostin);
        assert_eq!(s.n, 256);
        assert_eq!(s.params.mass, 1.0);
        assert!(s.resolved_text().contains("solver = kostin"));
    }

    #[test]
    fn unknown_key_errors_with_line_number() {
        let err = parse_config("solver = kostin\nnot_a_key = 3\n").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("not_a_key"), "{msg}");
    }

    #[test]
    fn frictionless_smoluchowski_is_rejected() {
        let err = parse_config("solver = smoluchowski\n").unwrap_err();
        assert!(format!("{err}").contains("friction_coefficient"), "{err}");
    }

    #[test]
    fn coffey_needs_temperature() {
        let err =
            parse_config("solver = phasespace\nx_model = coffey\nfriction = true\nfriction_coefficient = 1\n")
                .unwrap_err();
        assert!(format!("{err}").contains("coffey"), "{err}");
    }

    #[test]
    fn type_mismatch_names_key_and_line() {
        let err = parse_config("solver = kostin\nn = pancake\n").unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("`n`") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let s = parse_config("# a comment\n\nsolver = langevin # inline\nn_particles = 500\n")
            .unwrap();
        assert_eq!(s.solver, Solver::Langevin);
        assert_eq!(s.n_particles, 500);
    }
}
