//! Text formats: the profile table, flat key–value reports, the convergence
//! log and the run manifest.
//!
//! Numbers in data files are written with 17 significant digits, which is
//! enough for every `f64` to survive a write/read round trip bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use radstat_core::fixedpoint::PhysicalProfile;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const PROFILE_HEADER: &str = "r eta chi zeta rho u theta p";
pub const CONVERGENCE_HEADER: &str = "iteration increment ratio";
pub const CLOSED_FORM: &str = "closed-form";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Malformed { path: PathBuf, line: usize, message: String },
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io { path: path.to_path_buf(), source }
}

/// Seventeen significant digits.
pub fn full(x: f64) -> String {
    format!("{x:.16e}")
}

/// Columns of a profile file, in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileColumns {
    pub r: Vec<f64>,
    pub eta: Vec<f64>,
    pub chi: Vec<f64>,
    pub zeta: Vec<f64>,
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub theta: Vec<f64>,
    pub p: Vec<f64>,
}

impl ProfileColumns {
    pub fn from_profile(prof: &PhysicalProfile) -> Self {
        ProfileColumns {
            r: prof.grid().nodes().to_vec(),
            eta: prof.eta.values().to_vec(),
            chi: prof.chi.values().to_vec(),
            zeta: prof.zeta.values().to_vec(),
            rho: prof.rho.values().to_vec(),
            u: prof.u.values().to_vec(),
            theta: prof.theta.values().to_vec(),
            p: prof.p.values().to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    fn columns_mut(&mut self) -> [&mut Vec<f64>; 8] {
        [&mut self.r, &mut self.eta, &mut self.chi, &mut self.zeta, &mut self.rho, &mut self.u, &mut self.theta, &mut self.p]
    }

    fn row(&self, i: usize) -> [f64; 8] {
        [self.r[i], self.eta[i], self.chi[i], self.zeta[i], self.rho[i], self.u[i], self.theta[i], self.p[i]]
    }
}

pub fn profile_text(cols: &ProfileColumns) -> String {
    let mut out = String::with_capacity(cols.len() * 8 * 25);
    out.push_str(PROFILE_HEADER);
    out.push('\n');
    for i in 0..cols.len() {
        let row = cols.row(i).map(full);
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_profile(cols: &ProfileColumns, path: &Path) -> Result<(), FormatError> {
    fs::write(path, profile_text(cols)).map_err(io_error(path))
}

pub fn read_profile(path: &Path) -> Result<ProfileColumns, FormatError> {
    let file = fs::File::open(path).map_err(io_error(path))?;
    let malformed = |line: usize, message: String| FormatError::Malformed { path: path.to_path_buf(), line, message };
    let mut cols = ProfileColumns {
        r: Vec::new(),
        eta: Vec::new(),
        chi: Vec::new(),
        zeta: Vec::new(),
        rho: Vec::new(),
        u: Vec::new(),
        theta: Vec::new(),
        p: Vec::new(),
    };
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_error(path))?;
        let lineno = k + 1;
        if k == 0 {
            if line.trim() != PROFILE_HEADER {
                return Err(malformed(lineno, format!("expected header `{PROFILE_HEADER}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(malformed(lineno, format!("expected 8 columns, found {}", fields.len())));
        }
        for (col, text) in cols.columns_mut().into_iter().zip(&fields) {
            let v: f64 = text.parse().map_err(|_| malformed(lineno, format!("not a number: `{text}`")))?;
            col.push(v);
        }
    }
    if cols.is_empty() {
        return Err(malformed(1, "no data rows".to_string()));
    }
    Ok(cols)
}

/// Ordered flat key–value records, written one `key = value` per line.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn put(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn num(&mut self, key: impl Into<String>, value: f64) {
        self.put(key, full(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn parse(text: &str) -> Report {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        Report { entries }
    }
}

pub fn write_report(report: &Report, path: &Path) -> Result<(), FormatError> {
    fs::write(path, report.to_text()).map_err(io_error(path))
}

pub fn read_report(path: &Path) -> Result<Report, FormatError> {
    Ok(Report::parse(&fs::read_to_string(path).map_err(io_error(path))?))
}

/// Convergence log of an iteration; `None` for the closed form.
pub fn convergence_text(increments: Option<&[f64]>) -> String {
    let mut out = String::from(CONVERGENCE_HEADER);
    out.push('\n');
    match increments {
        None => {
            out.push_str(CLOSED_FORM);
            out.push('\n');
        }
        Some(inc) => {
            for (m, &x) in inc.iter().enumerate() {
                let ratio = if m == 0 { "-".to_string() } else { full(x / inc[m - 1]) };
                let _ = writeln!(out, "{} {} {}", m + 1, full(x), ratio);
            }
        }
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn file_sha256(path: &Path) -> Result<String, FormatError> {
    Ok(sha256_hex(&fs::read(path).map_err(io_error(path))?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    /// Path relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub name: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub exit_code: i32,
    /// The resolved configuration, defaults included.
    pub config: String,
    pub timings: Vec<Phase>,
    /// Flat convergence and check summary.
    pub summary: Vec<(String, String)>,
    pub files: Vec<ManifestFile>,
}

pub const MANIFEST_NAME: &str = "manifest.toml";

impl Manifest {
    pub fn new(command: &str, config: String) -> Self {
        Manifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            exit_code: 0,
            config,
            timings: Vec::new(),
            summary: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn record_file(&mut self, dir: &Path, name: &str) -> Result<(), FormatError> {
        let sha256 = file_sha256(&dir.join(name))?;
        self.files.push(ManifestFile { path: name.to_string(), sha256 });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, FormatError> {
        let path = dir.join(MANIFEST_NAME);
        let text = toml::to_string(self).expect("manifest is always representable");
        fs::write(&path, text).map_err(io_error(&path))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Manifest, FormatError> {
        let text = fs::read_to_string(path).map_err(io_error(path))?;
        toml::from_str(&text).map_err(|e| FormatError::Malformed { path: path.to_path_buf(), line: 0, message: e.to_string() })
    }

    /// Files whose content no longer matches the recorded checksum.
    pub fn stale_files(&self, dir: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|f| file_sha256(&dir.join(&f.path)).map(|h| h != f.sha256).unwrap_or(true))
            .map(|f| f.path.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, f64::MAX, f64::MIN_POSITIVE, 5e-324, 123456789.01234567, -0.0] {
            let y: f64 = full(x).parse().unwrap();
            assert_eq!(x.to_bits(), y.to_bits(), "{x}");
        }
    }

    #[test]
    fn digest_of_known_input() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn report_parses_its_own_text() {
        let mut r = Report::new();
        r.put("decay.eta.exponent", "-1.0");
        r.num("x", 0.1);
        r.put("flag", true);
        let back = Report::parse(&r.to_text());
        assert_eq!(back, r);
        assert_eq!(back.get("flag"), Some("true"));
    }

    #[test]
    fn convergence_log_layout() {
        let text = convergence_text(Some(&[1.0, 0.25]));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CONVERGENCE_HEADER);
        assert!(lines[1].ends_with(" -"));
        assert!(lines[2].ends_with(&full(0.25)));
        assert_eq!(convergence_text(None).lines().nth(1), Some(CLOSED_FORM));
    }
}
