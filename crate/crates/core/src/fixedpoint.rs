//! Successive approximation for the inflow and outflow problems, the
//! reconstruction of physical profiles and the closed-form solution of the
//! impermeable problem.
//!
//! One iterate, from level `m` to `m+1`:
//!
//! 1. `ζ^(m+1) = −A r^(n−1) η^m + B r^(n−1) χ^m + F(η^m, χ^m)`
//! 2. `H = H(η^m, ζ^(m+1), χ^m)`
//! 3. `χ^(m+1) = (χ_- − H(1)) r^(−(n−2)) + H`, and `α = κ(n−2)(χ_- − H(1))`
//! 4. inflow: `η^(m+1) = G(r,1)η_- + ∫₁^r G(r,s){B s^(n−1) χ^(m+1) + F(η^m, χ^m)} ds`;
//!    outflow: `η^(m+1) = −∫_r^∞ G̃(r,s){L(η^m) + B s^(n−1) χ^(m+1) + F(η^m, χ^m)} ds`
//!    with `L(η) = −(Rθ_+η(1)/(u_-μv_+²)) s^(n−1) η`.
//!
//! For outflow the mass flux `ε = u_-/(v_+ + η(1))` is updated from each
//! new iterate; the kernel exponent uses `u_-` directly so that the
//! dependence on `η(1)` sits entirely in `L`.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::functionals::{self, FunctionalError, PointModel};
use crate::grid::{build_grid, GridError, RadialGrid, SampledField};
use crate::math;
use crate::model::{classify_regime, derive_constants, smallness_check, DerivedConstants, FlowRegime, Parameters, SmallnessReport};
use crate::quadrature::{self, QuadError};

/// Number of consecutive increment growths that aborts an iteration.
pub const DIVERGENCE_RUN: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub enum SolveError {
    /// The closed form applies; there is nothing to iterate.
    Impermeable,
    /// The iterate left the admissible set (nonpositive volume or temperature).
    Inadmissible(FunctionalError),
    Grid(GridError),
    Quadrature(QuadError),
    BadControl(&'static str),
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveError::Impermeable => write!(f, "impermeable regime: use the closed-form solution"),
            SolveError::Inadmissible(e) => write!(f, "iterate left admissible set: {e}"),
            SolveError::Grid(e) => write!(f, "{e}"),
            SolveError::Quadrature(e) => write!(f, "{e}"),
            SolveError::BadControl(what) => write!(f, "invalid solver control: {what}"),
        }
    }
}

impl core::error::Error for SolveError {}

impl From<FunctionalError> for SolveError {
    fn from(e: FunctionalError) -> Self {
        match e {
            FunctionalError::Grid(g) => SolveError::Grid(g),
            FunctionalError::Quadrature(q) => SolveError::Quadrature(q),
            other => SolveError::Inadmissible(other),
        }
    }
}

impl From<GridError> for SolveError {
    fn from(e: GridError) -> Self {
        SolveError::Grid(e)
    }
}

impl From<QuadError> for SolveError {
    fn from(e: QuadError) -> Self {
        SolveError::Quadrature(e)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationState {
    pub eta: SampledField,
    pub chi: SampledField,
    pub zeta: SampledField,
    pub alpha: f64,
    pub epsilon: f64,
    pub m: usize,
    /// `‖Δη‖_{X_{n−2}} + ‖Δχ‖_{X_{n−2}}` of every iterate so far.
    pub increment_norms: Vec<f64>,
}

impl IterationState {
    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.eta.grid()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Control {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for Control {
    fn default() -> Self {
        Control { tol: 1e-10, max_iter: 200 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// Aborted early; the string explains why.
    Diverged(&'static str),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StationarySolution {
    pub state: IterationState,
    pub regime: FlowRegime,
    pub params: Parameters,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub final_increment: f64,
    /// `increment_m / increment_{m−1}` for `m ≥ 1`.
    pub contraction_ratios: Vec<f64>,
    /// Increment of one further application of the iteration map to the
    /// returned state; measures how well the fixed-point equations hold.
    pub fixed_point_residual: f64,
    pub smallness: SmallnessReport,
}

/// `sup_i r_i^l |f_i|` over the grid nodes.
pub fn sup_weighted(grid: &RadialGrid, values: &[f64], l: f64) -> f64 {
    grid.nodes()
        .iter()
        .zip(values)
        .map(|(&r, &v)| math::powf(r, l) * math::abs(v))
        .fold(0.0, f64::max)
}

fn increment(a: &IterationState, b: &IterationState) -> f64 {
    let grid = a.grid();
    let l = f64::from(grid.dim()) - 2.0;
    let d_eta: Vec<f64> = a.eta.values().iter().zip(b.eta.values()).map(|(x, y)| x - y).collect();
    let d_chi: Vec<f64> = a.chi.values().iter().zip(b.chi.values()).map(|(x, y)| x - y).collect();
    sup_weighted(grid, &d_eta, l) + sup_weighted(grid, &d_chi, l)
}

/// Grid resolving the kernel layer of the given configuration.
pub fn default_grid(p: &Parameters, r_max: f64, n_nodes: usize) -> Result<RadialGrid, SolveError> {
    let d = derive_constants(p);
    let scale = match classify_regime(p) {
        FlowRegime::Inflow => p.u_minus / p.v_minus(),
        FlowRegime::Outflow => math::abs(p.u_minus) / p.v_plus,
        FlowRegime::Impermeable => 1.0,
    };
    Ok(build_grid(p, &d, r_max, n_nodes, scale)?)
}

/// The starting iterate: `η⁰ = G(r,1)η_-`, `χ⁰ = χ_- r^(−(n−2))` for inflow
/// and `η⁰ = χ⁰ = 0` for outflow.
pub fn initial_state(p: &Parameters, grid: Arc<RadialGrid>) -> Result<IterationState, SolveError> {
    let d = derive_constants(p);
    let nf = p.nf();
    let n = p.n as i32;
    let (eta, chi, epsilon) = match classify_regime(p) {
        FlowRegime::Inflow => {
            let eps = p.u_minus / p.v_minus();
            let a = d.inflow_decay(eps);
            let eta = grid
                .nodes()
                .iter()
                .map(|&r| quadrature::kernel_g(r, 1.0, a, p.n).map(|g| g * p.eta_minus))
                .collect::<Result<Vec<_>, _>>()?;
            let chi = SampledField::from_fn(grid.clone(), nf - 2.0, |r| p.chi_minus * math::powi(r, 2 - n))?;
            (SampledField::new(grid.clone(), eta, nf - 2.0)?, chi, eps)
        }
        FlowRegime::Outflow => (
            SampledField::zeros(grid.clone(), nf - 2.0),
            SampledField::zeros(grid.clone(), nf - 2.0),
            p.u_minus / p.v_plus,
        ),
        FlowRegime::Impermeable => return Err(SolveError::Impermeable),
    };
    let zeta = SampledField::zeros(grid, nf - 1.0);
    Ok(IterationState { eta, chi, zeta, alpha: p.kappa * (nf - 2.0) * p.chi_minus, epsilon, m: 0, increment_norms: Vec::new() })
}

/// Steps 1–3, shared by both regimes. Returns `(ζ^(m+1), χ^(m+1), α, F(η^m, χ^m))`.
fn energy_update(
    s: &IterationState,
    p: &Parameters,
) -> Result<(SampledField, SampledField, f64, SampledField), SolveError> {
    let nf = p.nf();
    let n = p.n as i32;
    functionals::check_state(&s.eta, &s.chi, p)?;
    let tail = functionals::eta_tail_integral(&s.eta)?;
    let zeta = functionals::zeta_balance(&s.eta, &s.chi, &tail, p, s.epsilon)?;
    let f = functionals::f_nonlinearity(&s.eta, &s.chi, &tail, p, s.epsilon)?;
    let h = functionals::h_functional(&s.eta, &zeta, &s.chi, p, s.epsilon)?.h;
    let h1 = h.at_boundary();
    let c = p.chi_minus - h1;
    let grid = s.grid();
    let mut chi: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(h.values())
        .map(|(&r, &hv)| c * math::powi(r, 2 - n) + hv)
        .collect();
    chi[0] = p.chi_minus;
    let alpha = p.kappa * (nf - 2.0) * c;
    Ok((zeta, SampledField::new(grid.clone(), chi, nf - 2.0)?, alpha, f))
}

/// One inflow iterate.
pub fn inflow_iterate(s: &IterationState, p: &Parameters, d: &DerivedConstants) -> Result<IterationState, SolveError> {
    let grid = s.grid().clone();
    let nf = p.nf();
    let (zeta, chi, alpha, f) = energy_update(s, p)?;
    let model = PointModel::new(p, s.epsilon)?;
    let (_, b) = model.linear_coefficients();
    let a = d.inflow_decay(s.epsilon);
    let n = p.n as i32;
    let source: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(chi.values())
        .zip(f.values())
        .map(|((&r, &c), &fv)| b * math::powi(r, n - 1) * c + fv)
        .collect();
    let source = SampledField::without_tail(grid.clone(), source)?;
    let integral = quadrature::integrate_kernel_from_boundary_all(&source, a)?;
    let mut eta = Vec::with_capacity(grid.len());
    for (i, &r) in grid.nodes().iter().enumerate() {
        let g = quadrature::kernel_g(r, 1.0, a, p.n)?;
        eta.push(g * p.eta_minus + integral[i]);
    }
    eta[0] = p.eta_minus;
    let eta = SampledField::new(grid, eta, nf - 2.0)?;
    finish(s, eta, chi, zeta, alpha, s.epsilon)
}

/// One outflow iterate.
pub fn outflow_iterate(s: &IterationState, p: &Parameters, d: &DerivedConstants) -> Result<IterationState, SolveError> {
    let grid = s.grid().clone();
    let nf = p.nf();
    let n = p.n as i32;
    let (zeta, chi, alpha, f) = energy_update(s, p)?;
    let model = PointModel::new(p, s.epsilon)?;
    let (_, b_lin) = model.linear_coefficients();
    let eta1 = s.eta.at_boundary();
    let shift = -p.r_gas * p.theta_plus * eta1 / (p.u_minus * p.mu * p.v_plus * p.v_plus);
    let source: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(s.eta.values())
        .zip(chi.values())
        .zip(f.values())
        .map(|(((&r, &e), &c), &fv)| {
            let rn1 = math::powi(r, n - 1);
            shift * rn1 * e + b_lin * rn1 * c + fv
        })
        .collect();
    // s^(n−1)χ dominates the far field and grows like s.
    let source = SampledField::new(grid.clone(), source, -1.0)?;
    let b = d.outflow_decay(p.u_minus);
    let eta: Vec<f64> = quadrature::integrate_kernel_to_infinity_all(&source, b)?.into_iter().map(|x| -x).collect();
    let eta = SampledField::new(grid, eta, nf - 2.0)?;
    let v1 = p.v_plus + eta.at_boundary();
    if !(v1 > 0.0) {
        return Err(SolveError::Inadmissible(FunctionalError::SpecificVolumeCollapse { r: 1.0 }));
    }
    let epsilon = p.u_minus / v1;
    finish(s, eta, chi, zeta, alpha, epsilon)
}

fn finish(
    s: &IterationState,
    eta: SampledField,
    chi: SampledField,
    zeta: SampledField,
    alpha: f64,
    epsilon: f64,
) -> Result<IterationState, SolveError> {
    let mut next = IterationState { eta, chi, zeta, alpha, epsilon, m: s.m + 1, increment_norms: Vec::new() };
    let inc = increment(&next, s);
    next.increment_norms = s.increment_norms.clone();
    next.increment_norms.push(inc);
    Ok(next)
}

fn step(s: &IterationState, p: &Parameters, d: &DerivedConstants, regime: FlowRegime) -> Result<IterationState, SolveError> {
    match regime {
        FlowRegime::Inflow => inflow_iterate(s, p, d),
        FlowRegime::Outflow => outflow_iterate(s, p, d),
        FlowRegime::Impermeable => Err(SolveError::Impermeable),
    }
}

/// Iterate from the standard starting state until the increment drops to
/// `control.tol`.
pub fn solve_stationary(p: &Parameters, grid: Arc<RadialGrid>, control: Control) -> Result<StationarySolution, SolveError> {
    if !(control.tol > 0.0) || !control.tol.is_finite() {
        return Err(SolveError::BadControl("tol must be positive"));
    }
    if control.max_iter == 0 {
        return Err(SolveError::BadControl("max_iter must be at least 1"));
    }
    let regime = classify_regime(p);
    if regime == FlowRegime::Impermeable {
        return Err(SolveError::Impermeable);
    }
    let d = derive_constants(p);
    let mut state = initial_state(p, grid)?;
    let mut termination = Termination::MaxIterations;
    let mut growth_run = 0;
    while state.m < control.max_iter {
        let next = step(&state, p, &d, regime)?;
        if next.epsilon.signum() != p.u_minus.signum() {
            state = next;
            termination = Termination::Diverged("mass flux changed sign");
            break;
        }
        let norms = &next.increment_norms;
        let inc = norms[norms.len() - 1];
        if norms.len() >= 2 && inc > norms[norms.len() - 2] {
            growth_run += 1;
        } else {
            growth_run = 0;
        }
        state = next;
        if !inc.is_finite() {
            termination = Termination::Diverged("non-finite increment");
            break;
        }
        if inc <= control.tol {
            termination = Termination::Converged;
            break;
        }
        if growth_run >= DIVERGENCE_RUN {
            termination = Termination::Diverged("increment grew over five consecutive iterations");
            break;
        }
    }
    let fixed_point_residual = match step(&state, p, &d, regime) {
        Ok(next) => increment(&next, &state),
        Err(_) => f64::INFINITY,
    };
    // ζ carried by the iteration lags one level behind η; in the far field
    // the balance amplifies that lag by A r^(n−1), so re-evaluate it from
    // the returned state.
    if let Ok(tail) = functionals::eta_tail_integral(&state.eta) {
        if let Ok(zeta) = functionals::zeta_balance(&state.eta, &state.chi, &tail, p, state.epsilon) {
            state.zeta = zeta;
        }
    }
    let norms = state.increment_norms.clone();
    let contraction_ratios = norms.windows(2).map(|w| w[1] / w[0]).collect();
    let converged = termination == Termination::Converged;
    Ok(StationarySolution {
        iterations: state.m,
        final_increment: norms.last().copied().unwrap_or(f64::INFINITY),
        state,
        regime,
        params: p.clone(),
        converged,
        termination,
        contraction_ratios,
        fixed_point_residual,
        smallness: smallness_check(p),
    })
}

/// Density, velocity, temperature and pressure, plus the deviation fields.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalProfile {
    pub eta: SampledField,
    pub chi: SampledField,
    pub zeta: SampledField,
    pub rho: SampledField,
    pub u: SampledField,
    pub theta: SampledField,
    pub p: SampledField,
    pub mass_flux: f64,
    pub regime: FlowRegime,
}

impl PhysicalProfile {
    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.eta.grid()
    }

    /// Assemble from deviation fields: `ρ = 1/(v_+ + η)`, `u = εv/r^(n−1)`,
    /// `θ = θ_+ + χ`, `p = Rρθ`.
    pub fn from_deviations(
        eta: SampledField,
        chi: SampledField,
        zeta: SampledField,
        params: &Parameters,
        epsilon: f64,
        regime: FlowRegime,
    ) -> Result<Self, GridError> {
        let grid = eta.grid().clone();
        let nf = params.nf();
        let n = params.n as i32;
        let nodes = grid.nodes();
        let len = nodes.len();
        let mut rho = Vec::with_capacity(len);
        let mut u = Vec::with_capacity(len);
        let mut theta = Vec::with_capacity(len);
        let mut pres = Vec::with_capacity(len);
        for i in 0..len {
            let v = params.v_plus + eta.values()[i];
            let th = params.theta_plus + chi.values()[i];
            let rh = 1.0 / v;
            rho.push(rh);
            u.push(epsilon * v / math::powi(nodes[i], n - 1));
            theta.push(th);
            pres.push(params.r_gas * rh * th);
        }
        Ok(PhysicalProfile {
            rho: SampledField::new(grid.clone(), rho, 0.0)?,
            u: SampledField::new(grid.clone(), u, nf - 1.0)?,
            theta: SampledField::new(grid.clone(), theta, 0.0)?,
            p: SampledField::new(grid, pres, 0.0)?,
            eta,
            chi,
            zeta,
            mass_flux: epsilon,
            regime,
        })
    }
}

/// Physical fields of a solution.
pub fn reconstruct_physical(sol: &StationarySolution) -> Result<PhysicalProfile, SolveError> {
    let s = &sol.state;
    Ok(PhysicalProfile::from_deviations(
        s.eta.clone(),
        s.chi.clone(),
        s.zeta.clone(),
        &sol.params,
        s.epsilon,
        sol.regime,
    )?)
}

/// The exact solution at `u_- = 0`: `θ̃ = θ_+ + (θ_- − θ_+) r^(−(n−2))`,
/// `ρ = ρ_+θ_+/θ̃`, `u = 0`, constant pressure.
pub fn impermeable_solution(p: &Parameters, grid: Arc<RadialGrid>) -> Result<PhysicalProfile, SolveError> {
    let nf = p.nf();
    let n = p.n as i32;
    let chi = SampledField::from_fn(grid.clone(), nf - 2.0, |r| p.chi_minus * math::powi(r, 2 - n))?;
    // v = v_+ θ̃/θ_+, so η = v_+ χ/θ_+.
    let k = p.v_plus / p.theta_plus;
    let eta = chi.scaled(k);
    let zeta = SampledField::from_fn(grid.clone(), nf - 1.0, |r| {
        -(nf - 2.0) * k * p.chi_minus * math::powi(r, 1 - n)
    })?;
    let len = grid.len();
    let rho_theta = p.rho_plus() * p.theta_plus;
    let theta: Vec<f64> = chi.values().iter().map(|&c| p.theta_plus + c).collect();
    let rho: Vec<f64> = theta.iter().map(|&t| rho_theta / t).collect();
    let pres = alloc::vec![p.r_gas * rho_theta; len];
    Ok(PhysicalProfile {
        rho: SampledField::new(grid.clone(), rho, 0.0)?,
        u: SampledField::zeros(grid.clone(), nf - 1.0),
        theta: SampledField::new(grid.clone(), theta, 0.0)?,
        p: SampledField::new(grid, pres, 0.0)?,
        eta,
        chi,
        zeta,
        mass_flux: 0.0,
        regime: FlowRegime::Impermeable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_parameters, RawParameters};

    fn reference(u_minus: f64) -> Parameters {
        let mut raw = RawParameters::reference();
        raw.u_minus = u_minus;
        if u_minus <= 0.0 {
            raw.eta_minus = None;
        }
        build_parameters(&raw).unwrap()
    }

    #[test]
    fn boundary_values_are_exact() {
        let p = reference(1e-3);
        let grid = Arc::new(default_grid(&p, 200.0, 1024).unwrap());
        let d = derive_constants(&p);
        let mut s = initial_state(&p, grid).unwrap();
        assert_eq!(s.eta.at_boundary(), p.eta_minus);
        for _ in 0..3 {
            s = inflow_iterate(&s, &p, &d).unwrap();
            assert_eq!(s.eta.at_boundary(), p.eta_minus);
            assert_eq!(s.chi.at_boundary(), p.chi_minus);
        }
    }

    #[test]
    fn outflow_boundary_temperature_is_exact() {
        let p = reference(-1e-3);
        let grid = Arc::new(default_grid(&p, 200.0, 1024).unwrap());
        let d = derive_constants(&p);
        let mut s = initial_state(&p, grid).unwrap();
        for _ in 0..3 {
            s = outflow_iterate(&s, &p, &d).unwrap();
            assert_eq!(s.chi.at_boundary(), p.chi_minus);
            assert!(s.epsilon < 0.0);
            assert_eq!(s.epsilon, p.u_minus / (p.v_plus + s.eta.at_boundary()));
        }
    }

    #[test]
    fn impermeable_gate_and_closed_form() {
        let mut raw = RawParameters::reference();
        raw.u_minus = 0.0;
        raw.eta_minus = None;
        raw.chi_minus = 0.2;
        let p = build_parameters(&raw).unwrap();
        let grid = Arc::new(default_grid(&p, 200.0, 256).unwrap());
        assert_eq!(solve_stationary(&p, grid.clone(), Control::default()), Err(SolveError::Impermeable));
        let prof = impermeable_solution(&p, grid).unwrap();
        let i = prof.grid().nodes().iter().position(|&r| r >= 2.0).unwrap();
        let r = prof.grid().nodes()[i];
        assert!((prof.theta.values()[i] - (1.0 + 0.2 / r)).abs() < 1e-15);
        assert!(prof.p.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn mass_flux_is_constant() {
        let p = reference(1e-3);
        let grid = Arc::new(default_grid(&p, 200.0, 1024).unwrap());
        let sol = solve_stationary(&p, grid, Control { tol: 1e-12, max_iter: 60 }).unwrap();
        assert!(sol.converged);
        let prof = reconstruct_physical(&sol).unwrap();
        for ((&r, &rho), &u) in prof.grid().nodes().iter().zip(prof.rho.values()).zip(prof.u.values()) {
            let flux = r * r * rho * u;
            assert!((flux - prof.mass_flux).abs() <= 1e-12 * prof.mass_flux.abs());
        }
    }

    #[test]
    fn bad_control_is_rejected() {
        let p = reference(1e-3);
        let grid = Arc::new(default_grid(&p, 200.0, 256).unwrap());
        assert!(matches!(
            solve_stationary(&p, grid.clone(), Control { tol: 0.0, max_iter: 10 }),
            Err(SolveError::BadControl(_))
        ));
        let one = solve_stationary(&p, grid, Control { tol: 1e-14, max_iter: 1 }).unwrap();
        assert!(!one.converged);
        assert_eq!(one.termination, Termination::MaxIterations);
        assert_eq!(one.iterations, 1);
    }
}
