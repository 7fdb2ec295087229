//! Run configuration: a TOML file with a `[parameters]` table and optional
//! `[grid]`, `[control]`, `[sweep]` and `[verify]` tables.
//!
//! ```toml
//! [parameters]
//! n = 3
//! r_gas = 1.0
//! c_v = 1.5
//! nu = 0.5
//! lambda = 0.0
//! kappa = 1.0
//! v_plus = 1.0
//! theta_plus = 1.0
//! u_minus = 1e-3
//! eta_minus = 1e-3     # inflow only
//! chi_minus = 1e-3
//!
//! [grid]               # defaults shown
//! r_max = 200.0
//! n_nodes = 4096
//!
//! [control]
//! tol = 1e-10
//! max_iter = 200
//! ```

use std::path::{Path, PathBuf};

use radstat_core::analysis::SweepAxis;
use radstat_core::fixedpoint::Control;
use radstat_core::grid::{DEFAULT_R_MAX, MIN_NODES};
use radstat_core::model::{build_parameters, ParamError, Parameters, RawParameters};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_NODES: usize = 4096;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200;
pub const MAX_NODES: usize = 10_000_000;
pub const MIN_TOL: f64 = 1e-14;
pub const DEFAULT_PROBE_OFFSET: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("config field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("config [parameters]: {0}")]
    Parameters(#[from] ParamError),
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ParametersFile {
    pub n: i64,
    pub r_gas: f64,
    pub c_v: f64,
    pub nu: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub v_plus: f64,
    pub theta_plus: f64,
    pub u_minus: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_minus: Option<f64>,
    pub chi_minus: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_plus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
}

impl From<&ParametersFile> for RawParameters {
    fn from(f: &ParametersFile) -> Self {
        RawParameters {
            n: f.n,
            r_gas: f.r_gas,
            c_v: f.c_v,
            nu: f.nu,
            lambda: f.lambda,
            kappa: f.kappa,
            v_plus: f.v_plus,
            theta_plus: f.theta_plus,
            u_minus: f.u_minus,
            eta_minus: f.eta_minus,
            chi_minus: f.chi_minus,
            u_plus: f.u_plus,
            r0: f.r0,
        }
    }
}

impl From<&RawParameters> for ParametersFile {
    fn from(r: &RawParameters) -> Self {
        ParametersFile {
            n: r.n,
            r_gas: r.r_gas,
            c_v: r.c_v,
            nu: r.nu,
            lambda: r.lambda,
            kappa: r.kappa,
            v_plus: r.v_plus,
            theta_plus: r.theta_plus,
            u_minus: r.u_minus,
            eta_minus: r.eta_minus,
            chi_minus: r.chi_minus,
            u_plus: r.u_plus,
            r0: r.r0,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub r_max: Option<f64>,
    pub n_nodes: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ControlFile {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub axis: Option<String>,
    pub values: Option<Vec<f64>>,
    pub probe_offset: Option<f64>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyFile {
    pub fit_window: Option<[f64; 2]>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub parameters: ParametersFile,
    #[serde(default)]
    pub grid: GridFile,
    #[serde(default)]
    pub control: ControlFile,
    #[serde(default)]
    pub sweep: SweepFile,
    #[serde(default)]
    pub verify: VerifyFile,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOptions {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub probe_offset: f64,
}

/// A validated configuration with every default filled in.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub raw: RawParameters,
    pub params: Parameters,
    pub r_max: f64,
    pub n_nodes: usize,
    pub control: Control,
    /// Present when the file has a `[sweep]` table.
    pub sweep: Option<SweepOptions>,
    pub fit_window: (f64, f64),
}

impl RunSpec {
    /// The resolved configuration as TOML, for manifests and `--config`
    /// round trips.
    pub fn to_toml(&self) -> String {
        let file = ConfigFile {
            parameters: ParametersFile::from(&self.raw),
            grid: GridFile { r_max: Some(self.r_max), n_nodes: Some(self.n_nodes) },
            control: ControlFile { tol: Some(self.control.tol), max_iter: Some(self.control.max_iter) },
            sweep: self
                .sweep
                .as_ref()
                .map(|s| SweepFile {
                    axis: Some(s.axis.name().to_string()),
                    values: Some(s.values.clone()),
                    probe_offset: Some(s.probe_offset),
                })
                .unwrap_or_default(),
            verify: VerifyFile { fit_window: Some([self.fit_window.0, self.fit_window.1]) },
        };
        toml::to_string(&file).expect("configuration is always representable")
    }
}

pub fn parse_config(path: &Path) -> Result<RunSpec, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
    parse_config_str(&text).map_err(|e| match e {
        ConfigError::Parse { message, .. } => ConfigError::Parse { path: path.to_path_buf(), message },
        other => other,
    })
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field, message: message.into() }
}

pub fn parse_config_str(text: &str) -> Result<RunSpec, ConfigError> {
    let file: ConfigFile =
        toml::from_str(text).map_err(|e| ConfigError::Parse { path: PathBuf::new(), message: e.to_string() })?;
    let raw = RawParameters::from(&file.parameters);
    let params = build_parameters(&raw)?;

    let r_max = file.grid.r_max.unwrap_or(DEFAULT_R_MAX);
    if !(r_max > 1.0) || !r_max.is_finite() {
        return Err(invalid("grid.r_max", format!("must be finite and greater than 1 (got {r_max})")));
    }
    let n_nodes = file.grid.n_nodes.unwrap_or(DEFAULT_NODES);
    if !(MIN_NODES..=MAX_NODES).contains(&n_nodes) {
        return Err(invalid("grid.n_nodes", format!("must lie in [{MIN_NODES}, {MAX_NODES}] (got {n_nodes})")));
    }
    let tol = file.control.tol.unwrap_or(DEFAULT_TOL);
    if !(tol >= MIN_TOL) || !tol.is_finite() {
        return Err(invalid("control.tol", format!("must be finite and at least {MIN_TOL:e} (got {tol:e})")));
    }
    let max_iter = file.control.max_iter.unwrap_or(DEFAULT_MAX_ITER);
    if max_iter == 0 {
        return Err(invalid("control.max_iter", "must be at least 1"));
    }

    let sweep = match (&file.sweep.axis, &file.sweep.values) {
        (None, None) => None,
        (None, Some(_)) => return Err(invalid("sweep.axis", "missing")),
        (Some(_), None) => return Err(invalid("sweep.values", "missing")),
        (Some(axis), Some(values)) => {
            let axis = SweepAxis::parse(axis)
                .ok_or_else(|| invalid("sweep.axis", format!("unknown axis `{axis}` (expected u_minus, mu or data_scale)")))?;
            if values.is_empty() {
                return Err(invalid("sweep.values", "empty axis"));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(invalid("sweep.values", "values must be finite"));
            }
            let probe_offset = file.sweep.probe_offset.unwrap_or(DEFAULT_PROBE_OFFSET);
            if !(probe_offset > 0.0) || !probe_offset.is_finite() {
                return Err(invalid("sweep.probe_offset", "must be positive"));
            }
            Some(SweepOptions { axis, values: values.clone(), probe_offset })
        }
    };

    let fit_window = match file.verify.fit_window {
        Some([lo, hi]) => {
            if !(1.0 <= lo && lo < hi && hi <= r_max) {
                return Err(invalid("verify.fit_window", format!("need 1 ≤ lo < hi ≤ r_max (got [{lo}, {hi}])")));
            }
            (lo, hi)
        }
        None => radstat_core::analysis::default_fit_window(r_max),
    };

    Ok(RunSpec { raw, params, r_max, n_nodes, control: Control { tol, max_iter }, sweep, fit_window })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"
[parameters]
n = 3
r_gas = 1.0
c_v = 1.5
nu = 0.5
lambda = 0.0
kappa = 1.0
v_plus = 1.0
theta_plus = 1.0
u_minus = 1e-3
eta_minus = 1e-3
chi_minus = 1e-3
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let spec = parse_config_str(MINIMAL).unwrap();
        assert_eq!(spec.r_max, 200.0);
        assert_eq!(spec.n_nodes, 4096);
        assert_eq!(spec.control.tol, 1e-10);
        assert_eq!(spec.raw, RawParameters::reference());
        assert!(spec.sweep.is_none());
        assert_eq!(spec.fit_window, (50.0, 150.0));
    }

    #[test]
    fn resolved_spec_round_trips() {
        let spec = parse_config_str(MINIMAL).unwrap();
        let again = parse_config_str(&spec.to_toml()).unwrap();
        assert_eq!(spec, again);
    }

    #[test]
    fn missing_field_is_named() {
        let text = MINIMAL.replace("theta_plus = 1.0\n", "");
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("theta_plus"), "{err}");
    }

    #[test]
    fn far_field_velocity_is_rejected() {
        let text = format!("{MINIMAL}u_plus = 0.1\n");
        let err = parse_config_str(&text).unwrap_err().to_string();
        assert!(err.contains("u_plus") && err.contains("u_+ = 0"), "{err}");
        // An explicit zero is the required value and is accepted.
        assert!(parse_config_str(&format!("{MINIMAL}u_plus = 0.0\n")).is_ok());
    }

    #[test]
    fn bounds_are_enforced() {
        for (extra, field) in [
            ("[grid]\nn_nodes = 20000000\n", "grid.n_nodes"),
            ("[grid]\nr_max = 0.5\n", "grid.r_max"),
            ("[control]\ntol = 1e-16\n", "control.tol"),
            ("[sweep]\naxis = \"mu\"\nvalues = []\n", "sweep.values"),
            ("[sweep]\naxis = \"rho\"\nvalues = [1.0]\n", "sweep.axis"),
        ] {
            let err = parse_config_str(&format!("{MINIMAL}{extra}")).unwrap_err().to_string();
            assert!(err.contains(field), "{field}: {err}");
        }
    }

    #[test]
    fn unknown_keys_and_syntax_errors_are_reported() {
        let err = parse_config_str(&format!("{MINIMAL}[grid]\nnodes = 10\n")).unwrap_err().to_string();
        assert!(err.contains("nodes"), "{err}");
        let err = parse_config_str("[parameters\nn = 3").unwrap_err().to_string();
        assert!(err.contains("line 1") || err.contains("1:"), "{err}");
    }
}
