//! The four commands. Each writes its artifacts and a manifest into the
//! output directory and returns the process exit status.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use radstat_core::analysis::{
    check_kernel_lemma, check_theorem_bounds, fit_decay_exponent, residual_report, sweep_row, SweepRow, SweepSpec,
    SweepTable,
};
use radstat_core::bvp::{compare_solutions, solve_bvp, BvpError, NewtonControl};
use radstat_core::fixedpoint::{
    default_grid, impermeable_solution, reconstruct_physical, solve_stationary, sup_weighted, PhysicalProfile,
};
use radstat_core::grid::{RadialGrid, SampledField};
use radstat_core::model::{classify_regime, derive_constants, FlowRegime};
use thiserror::Error;

use crate::config::{ConfigError, RunSpec};
use crate::formats::{
    convergence_text, full, read_profile, write_profile, write_report, FormatError, Manifest, ProfileColumns, Report,
};

pub const PROFILE_FILE: &str = "profile.txt";
pub const CONVERGENCE_FILE: &str = "convergence.txt";
pub const REPORT_FILE: &str = "report.txt";
pub const SWEEP_FILE: &str = "sweep.txt";
pub const COMPARE_FILE: &str = "compare.txt";
pub const WORKERS_ENV: &str = "RADSTAT_WORKERS";

/// Largest X_{n−2}-weighted discrepancy accepted between a profile and the
/// boundary-value oracle.
pub const ORACLE_TOL: f64 = 1e-6;
/// Largest relative difference of α accepted between the two solvers.
pub const ALPHA_TOL: f64 = 1e-8;
/// Largest discrepancy accepted against the closed form.
pub const CLOSED_FORM_TOL: f64 = 1e-12;
/// Allowed deviation of a fitted decay exponent from the predicted rate.
pub const EXPONENT_TOL: f64 = 0.15;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    InputError = 1,
    NotConverged = 2,
    CheckFailed = 3,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{0}")]
    Input(String),
}

#[derive(Clone, Debug)]
pub struct Options {
    pub out: PathBuf,
    pub quiet: bool,
    /// Profile to verify; defaults to `profile.txt` in the output directory.
    pub profile: Option<PathBuf>,
    pub workers: usize,
}

impl Options {
    fn log(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("radstat: {}", msg.as_ref());
        }
    }
}

/// Worker count from the environment, or the available parallelism.
pub fn workers_from_env() -> Result<usize, CliError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Input(format!("{WORKERS_ENV} must be a positive integer (got `{v}`)"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn prepare(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|source| FormatError::Io { path: out.to_path_buf(), source })?;
    Ok(())
}

fn grid_of(spec: &RunSpec) -> Result<Arc<RadialGrid>, CliError> {
    Ok(Arc::new(default_grid(&spec.params, spec.r_max, spec.n_nodes).map_err(|e| CliError::Input(e.to_string()))?))
}

struct Timer {
    start: Instant,
    name: &'static str,
}

impl Timer {
    fn start(name: &'static str) -> Self {
        Timer { start: Instant::now(), name }
    }

    fn stop(self, m: &mut Manifest) {
        m.timings.push(crate::formats::Phase { name: self.name.to_string(), seconds: self.start.elapsed().as_secs_f64() });
    }
}

fn finish(mut m: Manifest, out: &Path, exit: Exit, files: &[&str]) -> Result<Exit, CliError> {
    m.exit_code = exit.code();
    for f in files {
        m.record_file(out, f)?;
    }
    m.write(out)?;
    Ok(exit)
}

fn summary(m: &mut Manifest, key: &str, value: impl ToString) {
    m.summary.push((key.to_string(), value.to_string()));
}

pub fn cmd_solve(spec: &RunSpec, opts: &Options) -> Result<Exit, CliError> {
    prepare(&opts.out)?;
    let p = &spec.params;
    let mut m = Manifest::new("solve", spec.to_toml());
    let regime = classify_regime(p);
    summary(&mut m, "regime", regime.name());
    summary(&mut m, "smallness", radstat_core::model::smallness_check(p).stamp());

    let t = Timer::start("grid");
    let grid = grid_of(spec)?;
    t.stop(&mut m);

    let t = Timer::start("solve");
    let (prof, log, exit) = if regime == FlowRegime::Impermeable {
        opts.log("impermeable data: writing the closed-form solution");
        let prof = impermeable_solution(p, grid).map_err(|e| CliError::Input(e.to_string()))?;
        summary(&mut m, "converged", true);
        (prof, convergence_text(None), Exit::Success)
    } else {
        let sol = match solve_stationary(p, grid, spec.control) {
            Ok(sol) => sol,
            Err(e) => {
                t.stop(&mut m);
                opts.log(format!("iteration failed: {e}"));
                summary(&mut m, "converged", false);
                summary(&mut m, "error", e);
                return finish(m, &opts.out, Exit::NotConverged, &[]);
            }
        };
        opts.log(format!(
            "{}: {} after {} iterations (increment {:.3e})",
            regime.name(),
            if sol.converged { "converged" } else { "not converged" },
            sol.iterations,
            sol.final_increment
        ));
        summary(&mut m, "converged", sol.converged);
        summary(&mut m, "termination", format!("{:?}", sol.termination));
        summary(&mut m, "iterations", sol.iterations);
        summary(&mut m, "final_increment", full(sol.final_increment));
        summary(&mut m, "fixed_point_residual", full(sol.fixed_point_residual));
        summary(&mut m, "alpha", full(sol.state.alpha));
        summary(&mut m, "epsilon", full(sol.state.epsilon));
        let prof = reconstruct_physical(&sol).map_err(|e| CliError::Input(e.to_string()))?;
        let exit = if sol.converged { Exit::Success } else { Exit::NotConverged };
        (prof, convergence_text(Some(&sol.state.increment_norms)), exit)
    };
    t.stop(&mut m);

    let t = Timer::start("write");
    write_profile(&ProfileColumns::from_profile(&prof), &opts.out.join(PROFILE_FILE))?;
    let log_path = opts.out.join(CONVERGENCE_FILE);
    fs::write(&log_path, log).map_err(|source| FormatError::Io { path: log_path, source })?;
    t.stop(&mut m);
    finish(m, &opts.out, exit, &[PROFILE_FILE, CONVERGENCE_FILE])
}

/// Rebuild a profile from its columns on the grid the run configuration prescribes.
pub fn profile_on_grid(cols: &ProfileColumns, spec: &RunSpec, grid: Arc<RadialGrid>) -> Result<PhysicalProfile, CliError> {
    let p = &spec.params;
    if cols.len() != grid.len() || cols.r.iter().zip(grid.nodes()).any(|(a, b)| a.to_bits() != b.to_bits()) {
        return Err(CliError::Input(format!(
            "profile grid ({} rows) does not match the configured grid ({} nodes, r_max {})",
            cols.len(),
            grid.len(),
            spec.r_max
        )));
    }
    let nf = p.nf();
    let field = |v: &[f64], tail: f64| SampledField::new(grid.clone(), v.to_vec(), tail).map_err(|e| CliError::Input(e.to_string()));
    // u(1) = εv(1) on the unit sphere.
    let epsilon = cols.u[0] / (p.v_plus + cols.eta[0]);
    Ok(PhysicalProfile {
        eta: field(&cols.eta, nf - 2.0)?,
        chi: field(&cols.chi, nf - 2.0)?,
        zeta: field(&cols.zeta, nf - 1.0)?,
        rho: field(&cols.rho, 0.0)?,
        u: field(&cols.u, nf - 1.0)?,
        theta: field(&cols.theta, 0.0)?,
        p: field(&cols.p, 0.0)?,
        mass_flux: epsilon,
        regime: classify_regime(p),
    })
}

fn weighted_gap(grid: &RadialGrid, a: &[f64], b: &[f64], l: f64) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    sup_weighted(grid, &d, l)
}

pub fn cmd_verify(spec: &RunSpec, opts: &Options) -> Result<Exit, CliError> {
    prepare(&opts.out)?;
    let p = &spec.params;
    let n = p.n;
    let nf = p.nf();
    let regime = classify_regime(p);
    let mut m = Manifest::new("verify", spec.to_toml());
    let mut r = Report::new();
    let mut hard_failures: Vec<&str> = Vec::new();

    let profile_path = opts.profile.clone().unwrap_or_else(|| opts.out.join(PROFILE_FILE));
    let t = Timer::start("read");
    let cols = read_profile(&profile_path)?;
    let grid = grid_of(spec)?;
    let prof = profile_on_grid(&cols, spec, grid.clone())?;
    t.stop(&mut m);
    r.put("profile.path", profile_path.display());
    r.put("profile.rows", cols.len());
    r.put("regime", regime.name());

    let t = Timer::start("residuals");
    let res = residual_report(&prof, p);
    for (name, e) in [
        ("mass", &res.mass),
        ("momentum", &res.momentum),
        ("energy", &res.energy),
        ("slope", &res.slope),
        ("state", &res.state),
        ("boundary", &res.boundary),
    ] {
        r.num(format!("residual.{name}.normalized"), e.normalized);
        r.num(format!("residual.{name}.worst_radius"), e.worst_radius);
    }
    r.num("residual.differential", res.differential_all());
    r.num("residual.consistency", res.consistency());
    r.put("residual.holds", res.is_solution);
    if !res.is_solution {
        hard_failures.push("residual");
    }
    t.stop(&mut m);

    let t = Timer::start("decay");
    let (lo, hi) = spec.fit_window;
    for (name, f, expect) in [("eta", &prof.eta, 2.0 - nf), ("chi", &prof.chi, 2.0 - nf), ("u", &prof.u, 1.0 - nf)] {
        if name == "u" && regime == FlowRegime::Impermeable {
            r.put("decay.u.holds", "not-applicable");
            continue;
        }
        r.num(format!("decay.{name}.expected"), expect);
        match fit_decay_exponent(f, lo, hi) {
            Ok(fit) => {
                r.num(format!("decay.{name}.exponent"), fit.exponent);
                r.num(format!("decay.{name}.r_squared"), fit.r_squared);
                r.put(format!("decay.{name}.window"), format!("{} {}", full(fit.window.0), full(fit.window.1)));
                r.put(format!("decay.{name}.nodes"), fit.nodes);
                r.put(format!("decay.{name}.holds"), (fit.exponent - expect).abs() <= EXPONENT_TOL);
            }
            Err(e) => {
                r.put(format!("decay.{name}.error"), e);
                r.put(format!("decay.{name}.holds"), false);
            }
        }
    }
    t.stop(&mut m);

    let t = Timer::start("bounds");
    let tb = check_theorem_bounds(&prof, p);
    r.num("bounds.estimates.eta_norm", tb.eta_norm.value);
    r.num("bounds.estimates.chi_norm", tb.chi_norm.value);
    r.num("bounds.estimates.data_size", tb.data_size);
    r.num("bounds.estimates.constant", tb.empirical_c());
    if let Some((vlo, vhi)) = tb.velocity_band {
        r.put("bounds.estimates.velocity_band", format!("{} {}", full(vlo), full(vhi)));
    }
    if let Some(w) = tb.eta_norm.warning.or(tb.chi_norm.warning) {
        r.put("bounds.estimates.warning", w);
    }
    r.put("bounds.estimates.holds", tb.report.holds);
    let d = derive_constants(p);
    match check_kernel_lemma(p, &d, &grid) {
        Ok(kl) => {
            r.put("bounds.kernel_pointwise.hypothesis", kl.hypothesis_holds);
            match &kl.pointwise {
                Some(pw) => {
                    r.num("bounds.kernel_pointwise.worst_margin", pw.worst_margin);
                    r.put("bounds.kernel_pointwise.holds", pw.holds);
                    // A hard check only where its hypothesis is met.
                    if kl.hypothesis_holds && !pw.holds {
                        hard_failures.push("kernel_pointwise");
                    }
                }
                None => r.put("bounds.kernel_pointwise.holds", "not-applicable"),
            }
            r.num("bounds.kernel_integral.spread", 2.0 * kl.integral.worst_margin);
            r.num("bounds.kernel_integral.constant", kl.integral.empirical_constant);
            r.put("bounds.kernel_integral.holds", kl.integral.holds);
        }
        Err(e) => r.put("bounds.kernel_integral.error", e),
    }
    t.stop(&mut m);

    let t = Timer::start("oracle");
    let l = nf - 2.0;
    if regime == FlowRegime::Impermeable {
        let exact = impermeable_solution(p, grid.clone()).map_err(|e| CliError::Input(e.to_string()))?;
        let gap = weighted_gap(&grid, prof.eta.values(), exact.eta.values(), l)
            .max(weighted_gap(&grid, prof.chi.values(), exact.chi.values(), l));
        r.put("oracle.kind", "closed-form");
        r.num("oracle.weighted", gap);
        r.put("oracle.holds", gap <= CLOSED_FORM_TOL);
        if gap > CLOSED_FORM_TOL {
            hard_failures.push("oracle");
        }
    } else {
        r.put("oracle.kind", "boundary-value");
        match solve_bvp(p, grid.clone(), None, NewtonControl::default()) {
            Ok(b) => {
                let s = &b.solution.state;
                let eta_gap = weighted_gap(&grid, prof.eta.values(), s.eta.values(), l);
                let chi_gap = weighted_gap(&grid, prof.chi.values(), s.chi.values(), l);
                let eps_rel = (prof.mass_flux - s.epsilon).abs() / s.epsilon.abs();
                r.num("oracle.eta_weighted", eta_gap);
                r.num("oracle.chi_weighted", chi_gap);
                r.num("oracle.weighted", eta_gap.max(chi_gap));
                r.num("oracle.epsilon_relative", eps_rel);
                r.num("oracle.alpha", s.alpha);
                r.put("oracle.newton_steps", b.newton_steps);
                r.num("oracle.newton_residual", b.residual);
                let ok = eta_gap.max(chi_gap) <= ORACLE_TOL;
                r.put("oracle.holds", ok);
                if !ok {
                    hard_failures.push("oracle");
                }
            }
            Err(e) => {
                r.put("oracle.error", e);
                r.put("oracle.holds", false);
                hard_failures.push("oracle");
            }
        }
    }
    t.stop(&mut m);

    r.put("checks.hard.failed", if hard_failures.is_empty() { "none".to_string() } else { hard_failures.join(",") });
    let exit = if hard_failures.is_empty() { Exit::Success } else { Exit::CheckFailed };
    r.put("verdict", if exit == Exit::Success { "pass" } else { "fail" });
    opts.log(format!("verify: {} (n = {n}, {})", r.get("verdict").unwrap_or(""), regime.name()));
    write_report(&r, &opts.out.join(REPORT_FILE))?;
    summary(&mut m, "verdict", r.get("verdict").unwrap_or(""));
    summary(&mut m, "checks.hard.failed", r.get("checks.hard.failed").unwrap_or(""));
    finish(m, &opts.out, exit, &[REPORT_FILE])
}

/// Run the rows on up to `workers` threads; rows come back in axis order
/// regardless of scheduling.
pub fn run_sweep(spec: &SweepSpec, base: &radstat_core::model::Parameters, workers: usize) -> SweepTable {
    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<SweepRow>> = Mutex::new(Vec::with_capacity(spec.values.len()));
    let workers = workers.clamp(1, spec.values.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&value) = spec.values.get(k) else { break };
                let row = sweep_row(spec, base, value);
                rows.lock().expect("no worker panics while holding the lock").push(row);
            });
        }
    });
    SweepTable::from_rows(spec.axis, rows.into_inner().expect("workers have finished"))
}

pub const SWEEP_HEADER: &str = "value regime converged iterations max_contraction empirical_c eta_exponent chi_exponent u_exponent layer_amplitude rho_boundary residual";

fn trend(values: &[f64]) -> &'static str {
    if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
        "undetermined"
    } else if values.windows(2).all(|w| w[0] < w[1]) {
        "increasing"
    } else if values.windows(2).all(|w| w[0] > w[1]) {
        "decreasing"
    } else {
        "mixed"
    }
}

pub fn cmd_sweep(spec: &RunSpec, opts: &Options) -> Result<Exit, CliError> {
    let sw = spec.sweep.as_ref().ok_or_else(|| CliError::Input("sweep needs a [sweep] table with axis and values".into()))?;
    prepare(&opts.out)?;
    let mut m = Manifest::new("sweep", spec.to_toml());
    let sweep_spec = SweepSpec {
        axis: sw.axis,
        values: sw.values.clone(),
        r_max: spec.r_max,
        n_nodes: spec.n_nodes,
        control: spec.control,
        probe_offset: sw.probe_offset,
    };
    opts.log(format!("sweep over {} ({} values, {} workers)", sw.axis.name(), sw.values.len(), opts.workers));
    let t = Timer::start("sweep");
    let table = run_sweep(&sweep_spec, &spec.params, opts.workers);
    t.stop(&mut m);

    let mut text = format!("# axis {}\n{SWEEP_HEADER}\n", sw.axis.name());
    for row in &table.rows {
        let regime = row.regime.map(|r| r.name()).unwrap_or("invalid");
        let nums = [
            row.max_contraction,
            row.empirical_c,
            row.eta_exponent,
            row.chi_exponent,
            row.u_exponent,
            row.layer_amplitude,
            row.rho_boundary,
            row.residual,
        ]
        .map(full);
        text.push_str(&format!("{} {regime} {} {} {}\n", full(row.value), row.converged, row.iterations, nums.join(" ")));
    }
    let path = opts.out.join(SWEEP_FILE);
    fs::write(&path, text).map_err(|source| FormatError::Io { path: path.clone(), source })?;

    let ok: Vec<&SweepRow> = table.rows.iter().filter(|r| r.converged && r.error.is_none()).collect();
    summary(&mut m, "axis", sw.axis.name());
    summary(&mut m, "rows", table.rows.len());
    summary(&mut m, "succeeded", ok.len());
    for (k, row) in table.rows.iter().enumerate() {
        summary(&mut m, &format!("row.{k}.value"), full(row.value));
        summary(&mut m, &format!("row.{k}.converged"), row.converged && row.error.is_none());
        if let Some(e) = &row.error {
            summary(&mut m, &format!("row.{k}.error"), e);
        }
    }
    let amps: Vec<f64> = ok.iter().map(|r| r.layer_amplitude).collect();
    summary(&mut m, "layer_amplitude.trend", trend(&amps));
    let cs: Vec<f64> = ok.iter().map(|r| r.empirical_c).collect();
    if let (Some(lo), Some(hi)) = (cs.iter().copied().reduce(f64::min), cs.iter().copied().reduce(f64::max)) {
        summary(&mut m, "empirical_c.spread", full(hi / lo));
    }
    let exit = if ok.is_empty() { Exit::NotConverged } else { Exit::Success };
    opts.log(format!("sweep: {} of {} rows succeeded", ok.len(), table.rows.len()));
    finish(m, &opts.out, exit, &[SWEEP_FILE])
}

pub fn cmd_compare(spec: &RunSpec, opts: &Options) -> Result<Exit, CliError> {
    let p = &spec.params;
    if classify_regime(p) == FlowRegime::Impermeable {
        return Err(CliError::Input("compare: the boundary-value oracle does not apply at u_minus = 0 (use solve)".into()));
    }
    prepare(&opts.out)?;
    let mut m = Manifest::new("compare", spec.to_toml());
    let grid = grid_of(spec)?;
    let mut r = Report::new();
    r.put("regime", classify_regime(p).name());

    let t = Timer::start("fixed-point");
    let fp = solve_stationary(p, grid.clone(), spec.control).map_err(|e| CliError::Input(e.to_string()));
    t.stop(&mut m);
    let fp = match fp {
        Ok(s) if s.converged => s,
        other => {
            let why = match other {
                Ok(s) => format!("{:?}", s.termination),
                Err(e) => e.to_string(),
            };
            r.put("fixed_point.error", why);
            write_report(&r, &opts.out.join(COMPARE_FILE))?;
            return finish(m, &opts.out, Exit::NotConverged, &[COMPARE_FILE]);
        }
    };
    r.put("fixed_point.iterations", fp.iterations);
    r.num("fixed_point.alpha", fp.state.alpha);

    let t = Timer::start("boundary-value");
    let bvp = solve_bvp(p, grid, None, NewtonControl::default());
    t.stop(&mut m);
    let b = match bvp {
        Ok(b) => b,
        Err(e) => {
            r.put("oracle.error", &e);
            write_report(&r, &opts.out.join(COMPARE_FILE))?;
            let exit = match e {
                BvpError::NotConverged { .. } | BvpError::Singular(_) => Exit::NotConverged,
                _ => Exit::CheckFailed,
            };
            return finish(m, &opts.out, exit, &[COMPARE_FILE]);
        }
    };
    r.put("oracle.newton_steps", b.newton_steps);
    r.num("oracle.newton_residual", b.residual);
    r.num("oracle.alpha", b.solution.state.alpha);
    let c = compare_solutions(&fp, &b.solution, p.nf() - 2.0).map_err(|e| CliError::Input(e.to_string()))?;
    r.num("compare.weight", c.weight);
    r.num("compare.eta_weighted", c.eta_weighted);
    r.num("compare.chi_weighted", c.chi_weighted);
    r.num("compare.eta_sup", c.eta_sup);
    r.num("compare.chi_sup", c.chi_sup);
    r.num("compare.worst_radius", c.worst_radius);
    r.num("compare.alpha_relative", c.alpha_relative);
    r.num("compare.epsilon_relative", c.epsilon_relative);
    let ok = c.weighted() <= ORACLE_TOL && c.alpha_relative <= ALPHA_TOL;
    r.put("compare.holds", ok);
    opts.log(format!("compare: weighted {:.3e}, α relative {:.3e}", c.weighted(), c.alpha_relative));
    write_report(&r, &opts.out.join(COMPARE_FILE))?;
    summary(&mut m, "compare.holds", ok);
    finish(m, &opts.out, if ok { Exit::Success } else { Exit::CheckFailed }, &[COMPARE_FILE])
}
