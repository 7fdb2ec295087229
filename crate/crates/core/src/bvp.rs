//! Independent solver: the stationary problem as a two-point boundary-value
//! problem for a local ODE system, solved by damped Newton iteration.
//!
//! The two nonlocal integrals are promoted to state variables,
//! `z(r) = ∫_r^∞ η/s^(2n−1) ds` and `w(r) = ∫_r^∞ Φ ds`. The constants `α`
//! and `ε` become states with zero derivative, so their values are fixed
//! by the boundary conditions. Per node the unknowns are
//! `y = (η, χ, z, w, α, ε)`:
//!
//! ```text
//! η' = ζ(η, χ, z; ε)          (momentum balance)
//! χ' = χ_r(η, ζ, χ, w, α; ε)  (energy balance)
//! z' = −η / r^(2n−1)
//! w' = −Φ(η, ζ; ε)
//! α' = 0,  ε' = 0
//! ```
//!
//! The equations are discretized with the trapezoidal box scheme between
//! neighbouring nodes. Boundary conditions at `r = 1` are `η = η_-`,
//! `χ = χ_-`, `ε = u_-/v_-` (inflow) or `χ = χ_-`, `ε(v_+ + η) = u_-`
//! (outflow). At `R_max`, `z`, `w` and `χ` match their algebraic tails; for
//! outflow, where the fast mode of `η` grows outwards, `η` additionally
//! satisfies the power-law balance `η' = −(n−2)η/r`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::banded::{BandError, BandMatrix};
use crate::fixedpoint::{sup_weighted, IterationState, StationarySolution, Termination};
use crate::functionals::{self, FunctionalError, PointModel};
use crate::grid::{GridError, RadialGrid, SampledField};
use crate::math;
use crate::model::{classify_regime, smallness_check, FlowRegime, Parameters};
use crate::quadrature::{self, QuadError};

/// Unknowns per node.
pub const STATES: usize = 6;
const ETA: usize = 0;
const CHI: usize = 1;
const Z: usize = 2;
const W: usize = 3;
const ALPHA: usize = 4;
const EPS: usize = 5;

/// Smallest damping factor tried by the line search.
pub const MIN_DAMPING: f64 = 1.0 / 1024.0;
/// Largest residual (max norm over all discrete equations) accepted as converged.
pub const RESIDUAL_ACCEPT: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub enum BvpError {
    Impermeable,
    NotConverged { steps: usize, residual: f64 },
    Singular(BandError),
    Model(FunctionalError),
    Grid(GridError),
}

impl fmt::Display for BvpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BvpError::Impermeable => write!(f, "impermeable regime: the boundary-value oracle does not apply"),
            BvpError::NotConverged { steps, residual } => {
                write!(f, "Newton iteration failed after {steps} steps (residual {residual:e})")
            }
            BvpError::Singular(e) => write!(f, "{e}"),
            BvpError::Model(e) => write!(f, "{e}"),
            BvpError::Grid(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for BvpError {}

impl From<FunctionalError> for BvpError {
    fn from(e: FunctionalError) -> Self {
        BvpError::Model(e)
    }
}

impl From<GridError> for BvpError {
    fn from(e: GridError) -> Self {
        BvpError::Grid(e)
    }
}

impl From<QuadError> for BvpError {
    fn from(e: QuadError) -> Self {
        BvpError::Model(FunctionalError::Quadrature(e))
    }
}

impl From<BandError> for BvpError {
    fn from(e: BandError) -> Self {
        BvpError::Singular(e)
    }
}

/// Local state of the augmented system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentedState {
    pub eta: f64,
    pub chi: f64,
    pub z: f64,
    pub w: f64,
}

/// The constants fixed by the boundary conditions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BvpUnknowns {
    pub alpha: f64,
    /// Boundary value of `η`; determines `ε` for outflow, ignored for inflow.
    pub eta_at_1: f64,
}

impl BvpUnknowns {
    /// The mass flux implied by these unknowns.
    pub fn epsilon(&self, p: &Parameters) -> f64 {
        match classify_regime(p) {
            FlowRegime::Inflow => p.u_minus / p.v_minus(),
            _ => p.u_minus / (p.v_plus + self.eta_at_1),
        }
    }
}

/// Derivatives of the augmented state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentedDerivative {
    pub eta_r: f64,
    pub chi_r: f64,
    pub z_r: f64,
    pub w_r: f64,
}

fn node_rhs(p: &Parameters, r: f64, y: &[f64]) -> Result<[f64; STATES], FunctionalError> {
    if !(p.theta_plus + y[CHI] > 0.0) {
        return Err(FunctionalError::TemperatureCollapse { r });
    }
    let m = PointModel::new(p, y[EPS])?;
    let zeta = m.zeta(r, y[ETA], y[CHI], y[Z])?;
    let chi_r = m.chi_r(r, y[ETA], zeta, y[CHI], y[W], y[ALPHA]);
    let z_r = -y[ETA] / math::powi(r, 2 * p.n as i32 - 1);
    let w_r = -m.phi(r, y[ETA], zeta);
    Ok([zeta, chi_r, z_r, w_r, 0.0, 0.0])
}

/// Right-hand side of the augmented system. `η_r` is evaluated first and
/// substituted into `χ_r` and `Φ`.
pub fn augmented_rhs(
    r: f64,
    s: &AugmentedState,
    unk: &BvpUnknowns,
    p: &Parameters,
) -> Result<AugmentedDerivative, FunctionalError> {
    let y = [s.eta, s.chi, s.z, s.w, unk.alpha, unk.epsilon(p)];
    let d = node_rhs(p, r, &y)?;
    Ok(AugmentedDerivative { eta_r: d[0], chi_r: d[1], z_r: d[2], w_r: d[3] })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonControl {
    pub max_steps: usize,
    pub extrapolate: bool,
}

impl Default for NewtonControl {
    fn default() -> Self {
        NewtonControl { max_steps: 40, extrapolate: true }
    }
}

#[derive(Clone, Debug)]
pub struct BvpSolution {
    /// The solution in the same form the fixed-point solver reports.
    pub solution: StationarySolution,
    pub z: SampledField,
    pub w: SampledField,
    /// Max-norm residual over all discrete equations at the returned state.
    pub residual: f64,
    /// Newton steps on the given grid.
    pub newton_steps: usize,
    /// Newton steps on the halved grid, when extrapolating.
    pub refined_steps: Option<usize>,
    /// Residual after each Newton step on the given grid.
    pub residual_history: Vec<f64>,
}

struct System<'a> {
    p: &'a Parameters,
    grid: &'a RadialGrid,
    regime: FlowRegime,
    left: usize,
    /// Per-interval scale of the η rows, `1/(1 + h|A|r̄^(n−1))`.
    eta_scale: Vec<f64>,
    /// Scale of the outflow far-field η row.
    far_eta_scale: f64,
    /// Typical magnitude of each state, for finite-difference steps.
    typical: [f64; STATES],
}

impl<'a> System<'a> {
    fn new(p: &'a Parameters, grid: &'a RadialGrid, regime: FlowRegime, y: &[f64]) -> Self {
        let eps = y[EPS];
        let a = p.r_gas * p.theta_plus / (math::abs(eps) * p.mu * p.v_plus * p.v_plus);
        let n = p.n as i32;
        let nodes = grid.nodes();
        let eta_scale = nodes
            .windows(2)
            .map(|w| {
                let h = w[1] - w[0];
                let rbar = 0.5 * (math::powi(w[0], n - 1) + math::powi(w[1], n - 1));
                1.0 / (1.0 + h * a * rbar)
            })
            .collect();
        let r_max = grid.r_max();
        let mut typical = [0.0f64; STATES];
        for node in y.chunks(STATES) {
            for (t, v) in typical.iter_mut().zip(node) {
                *t = t.max(math::abs(*v));
            }
        }
        for t in typical.iter_mut() {
            if *t == 0.0 {
                *t = 1e-12;
            }
        }
        System {
            p,
            grid,
            regime,
            left: if regime == FlowRegime::Inflow { 3 } else { 2 },
            eta_scale,
            far_eta_scale: 1.0 / (1.0 + a * math::powi(r_max, n)),
            typical,
        }
    }

    fn unknowns(&self) -> usize {
        self.grid.len() * STATES
    }

    fn left_bc(&self, y0: &[f64]) -> [f64; 3] {
        let p = self.p;
        match self.regime {
            FlowRegime::Inflow => [y0[ETA] - p.eta_minus, y0[CHI] - p.chi_minus, y0[EPS] - p.u_minus / p.v_minus()],
            _ => [y0[CHI] - p.chi_minus, y0[EPS] * (p.v_plus + y0[ETA]) - p.u_minus, 0.0],
        }
    }

    fn right_bc(&self, y: &[f64]) -> Result<[f64; 4], FunctionalError> {
        let p = self.p;
        let r = self.grid.r_max();
        let nf = p.nf();
        let m = PointModel::new(p, y[EPS])?;
        let zeta = m.zeta(r, y[ETA], y[CHI], y[Z])?;
        let z = y[Z] - m.z_tail(r, y[ETA]);
        let w = y[W] - m.phi_tail(r, y[ETA], zeta);
        let chi = y[CHI]
            - y[ALPHA] / (p.kappa * (nf - 2.0) * math::powf(r, nf - 2.0))
            - m.h_tail(r, y[ETA], zeta, y[CHI], y[W]);
        let eta = (zeta + (nf - 2.0) * y[ETA] / r) * self.far_eta_scale;
        Ok([z, w, chi, eta])
    }

    fn right_count(&self) -> usize {
        STATES - self.left
    }

    fn interval_residual(&self, i: usize, ya: &[f64], yb: &[f64], fa: &[f64; STATES], fb: &[f64; STATES], out: &mut [f64]) {
        let nodes = self.grid.nodes();
        let h = nodes[i + 1] - nodes[i];
        for c in 0..STATES {
            out[c] = yb[c] - ya[c] - 0.5 * h * (fa[c] + fb[c]);
        }
        out[ETA] *= self.eta_scale[i];
    }

    fn residual(&self, y: &[f64]) -> Result<Vec<f64>, FunctionalError> {
        let nodes = self.grid.nodes();
        let len = nodes.len();
        let mut out = vec![0.0; self.unknowns()];
        let left = self.left_bc(&y[..STATES]);
        out[..self.left].copy_from_slice(&left[..self.left]);
        let f: Vec<[f64; STATES]> = (0..len)
            .map(|i| node_rhs(self.p, nodes[i], &y[i * STATES..(i + 1) * STATES]))
            .collect::<Result<_, _>>()?;
        for i in 0..len - 1 {
            let row = self.left + i * STATES;
            self.interval_residual(
                i,
                &y[i * STATES..(i + 1) * STATES],
                &y[(i + 1) * STATES..(i + 2) * STATES],
                &f[i],
                &f[i + 1],
                &mut out[row..row + STATES],
            );
        }
        let right = self.right_bc(&y[(len - 1) * STATES..])?;
        let start = self.left + (len - 1) * STATES;
        out[start..].copy_from_slice(&right[..self.right_count()]);
        Ok(out)
    }

    fn step(&self, y: &[f64], j: usize) -> f64 {
        1e-7 * (math::abs(y[j]) + self.typical[j])
    }

    /// Central-difference Jacobian of `g` at `y` (`rows` outputs).
    fn fd_block<const R: usize>(
        &self,
        y: &[f64],
        g: impl Fn(&[f64]) -> Result<[f64; R], FunctionalError>,
    ) -> Result<[[f64; STATES]; R], FunctionalError> {
        let mut jac = [[0.0; STATES]; R];
        let mut yp = [0.0; STATES];
        yp.copy_from_slice(y);
        for j in 0..STATES {
            let h = self.step(y, j);
            yp[j] = y[j] + h;
            let plus = g(&yp)?;
            yp[j] = y[j] - h;
            let minus = g(&yp)?;
            yp[j] = y[j];
            for c in 0..R {
                jac[c][j] = (plus[c] - minus[c]) / (2.0 * h);
            }
        }
        Ok(jac)
    }

    fn jacobian(&self, y: &[f64]) -> Result<BandMatrix, BvpError> {
        let nodes = self.grid.nodes();
        let len = nodes.len();
        let kl = STATES - 1 + self.left;
        let ku = 2 * STATES - 1 - self.left;
        let mut jac = BandMatrix::zeros(self.unknowns(), kl, ku);

        let left = self.fd_block(&y[..STATES], |v| Ok(self.left_bc(v)))?;
        for (c, row) in left.iter().enumerate().take(self.left) {
            for (j, &v) in row.iter().enumerate() {
                jac.set(c, j, v)?;
            }
        }

        let node_jac: Vec<[[f64; STATES]; STATES]> = (0..len)
            .map(|i| self.fd_block(&y[i * STATES..(i + 1) * STATES], |v| node_rhs(self.p, nodes[i], v)))
            .collect::<Result<_, _>>()?;
        for i in 0..len - 1 {
            let h = nodes[i + 1] - nodes[i];
            let row0 = self.left + i * STATES;
            for c in 0..STATES {
                let scale = if c == ETA { self.eta_scale[i] } else { 1.0 };
                for j in 0..STATES {
                    let delta = if c == j { 1.0 } else { 0.0 };
                    let a = (-delta - 0.5 * h * node_jac[i][c][j]) * scale;
                    let b = (delta - 0.5 * h * node_jac[i + 1][c][j]) * scale;
                    jac.set(row0 + c, i * STATES + j, a)?;
                    jac.set(row0 + c, (i + 1) * STATES + j, b)?;
                }
            }
        }

        let last = &y[(len - 1) * STATES..];
        let right = self.fd_block(last, |v| self.right_bc(v))?;
        let row0 = self.left + (len - 1) * STATES;
        for (c, row) in right.iter().enumerate().take(self.right_count()) {
            for (j, &v) in row.iter().enumerate() {
                jac.set(row0 + c, (len - 1) * STATES + j, v)?;
            }
        }
        Ok(jac)
    }
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(math::abs(*x)))
}

/// Cold starting guess: `η = η_-G + (v_+/θ_+)χ_- r^(−(n−2))(1 − G)`,
/// `χ = χ_- r^(−(n−2))`, `α = κ(n−2)χ_-`, with `z`, `w` integrated from it.
fn cold_guess(p: &Parameters, grid: &Arc<RadialGrid>, regime: FlowRegime) -> Result<Vec<f64>, BvpError> {
    let nf = p.nf();
    let n = p.n as i32;
    let k = p.v_plus / p.theta_plus;
    let (eps, a) = match regime {
        FlowRegime::Inflow => {
            let e = p.u_minus / p.v_minus();
            (e, Some(p.r_gas * p.theta_plus / (p.v_plus * p.v_plus * nf) / (p.mu * e)))
        }
        _ => (p.u_minus / (p.v_plus + k * p.chi_minus), None),
    };
    let nodes = grid.nodes();
    let mut eta = Vec::with_capacity(nodes.len());
    let mut chi = Vec::with_capacity(nodes.len());
    for &r in nodes {
        let c = p.chi_minus * math::powi(r, 2 - n);
        let g = match a {
            Some(a) => quadrature::kernel_g(r, 1.0, a, p.n)?,
            None => 0.0,
        };
        eta.push(p.eta_minus * g + k * c * (1.0 - g));
        chi.push(c);
    }
    let eta = SampledField::new(grid.clone(), eta, nf - 2.0)?;
    let chi = SampledField::new(grid.clone(), chi, nf - 2.0)?;
    let zeta = SampledField::zeros(grid.clone(), nf - 1.0);
    let alpha = p.kappa * (nf - 2.0) * p.chi_minus;
    pack(p, &eta, &chi, &zeta, alpha, eps)
}

fn pack(
    p: &Parameters,
    eta: &SampledField,
    chi: &SampledField,
    zeta: &SampledField,
    alpha: f64,
    eps: f64,
) -> Result<Vec<f64>, BvpError> {
    let z = functionals::eta_tail_integral(eta)?;
    let w = functionals::h_functional(eta, zeta, chi, p, eps)?.w;
    let mut y = Vec::with_capacity(eta.values().len() * STATES);
    for i in 0..eta.values().len() {
        y.extend_from_slice(&[eta.values()[i], chi.values()[i], z.values()[i], w.values()[i], alpha, eps]);
    }
    Ok(y)
}

/// Solve the augmented boundary-value problem. With `init`, Newton starts
/// from that solution (on its grid); otherwise from a cold guess on `grid`.
///
/// With `control.extrapolate`, the problem is solved again on the grid with
/// every interval halved and the two solutions are combined by Richardson
/// extrapolation, `(4y_{h/2} − y_h)/3`, which removes the `O(h²)` error of
/// the box scheme.
pub fn solve_bvp(
    p: &Parameters,
    grid: Arc<RadialGrid>,
    init: Option<&StationarySolution>,
    control: NewtonControl,
) -> Result<BvpSolution, BvpError> {
    let regime = classify_regime(p);
    if regime == FlowRegime::Impermeable {
        return Err(BvpError::Impermeable);
    }
    let (grid, y0) = match init {
        Some(sol) => {
            let s = &sol.state;
            let g = s.grid().clone();
            let y = pack(p, &s.eta, &s.chi, &s.zeta, s.alpha, s.epsilon)?;
            (g, y)
        }
        None => {
            let y = cold_guess(p, &grid, regime)?;
            (grid, y)
        }
    };
    let coarse = newton(p, &grid, regime, y0, control)?;
    if !control.extrapolate {
        let y = coarse.y.clone();
        return unpack(p, grid, regime, &y, coarse, None);
    }
    let fine_grid = Arc::new(grid.refined()?);
    let guess = prolong(&grid, &fine_grid, &coarse.y)?;
    let fine = newton(p, &fine_grid, regime, guess, control)?;
    let y: Vec<f64> = coarse
        .y
        .chunks(STATES)
        .enumerate()
        .flat_map(|(i, yc)| {
            let yf = &fine.y[2 * i * STATES..(2 * i + 1) * STATES];
            (0..STATES).map(move |c| (4.0 * yf[c] - yc[c]) / 3.0)
        })
        .collect();
    unpack(p, grid, regime, &y, coarse, Some(fine))
}

/// Interpolate a node-major state vector onto the refined grid.
fn prolong(coarse: &Arc<RadialGrid>, fine: &Arc<RadialGrid>, y: &[f64]) -> Result<Vec<f64>, BvpError> {
    let columns: Vec<SampledField> = (0..STATES)
        .map(|c| SampledField::new(coarse.clone(), y.chunks(STATES).map(|v| v[c]).collect(), 0.0))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(fine.len() * STATES);
    for (k, &r) in fine.nodes().iter().enumerate() {
        for (c, col) in columns.iter().enumerate() {
            out.push(if k % 2 == 0 { y[(k / 2) * STATES + c] } else { col.value_at(r) });
        }
    }
    Ok(out)
}

struct NewtonRun {
    y: Vec<f64>,
    residual: f64,
    steps: usize,
    history: Vec<f64>,
}

fn newton(
    p: &Parameters,
    grid: &RadialGrid,
    regime: FlowRegime,
    mut y: Vec<f64>,
    control: NewtonControl,
) -> Result<NewtonRun, BvpError> {
    let sys = System::new(p, grid, regime, &y);
    let mut res = sys.residual(&y)?;
    let mut norm = max_norm(&res);
    let mut history = vec![norm];
    let mut steps = 0;
    // Stop once the residual is at rounding level for the data scale, or
    // once a full Newton step no longer changes the state.
    let scale = sys.typical[ETA].max(sys.typical[CHI]);
    let stop = 1e-13 * scale;
    while steps < control.max_steps && norm > stop {
        let mut jac = sys.jacobian(&y)?;
        let mut dx: Vec<f64> = res.iter().map(|v| -v).collect();
        jac.solve(&mut dx)?;
        let mut lambda = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = y.iter().zip(&dx).map(|(a, b)| a + lambda * b).collect();
            if let Ok(r) = sys.residual(&trial) {
                let n = max_norm(&r);
                if n < norm {
                    break Some((trial, r, n));
                }
            }
            lambda *= 0.5;
            if lambda < MIN_DAMPING {
                break None;
            }
        };
        let Some((trial, r, n)) = accepted else { break };
        steps += 1;
        let moved = y
            .iter()
            .zip(&trial)
            .enumerate()
            .map(|(k, (a, b))| math::abs(a - b) / (sys.typical[k % STATES] + math::abs(*a)))
            .fold(0.0, f64::max);
        y = trial;
        res = r;
        norm = n;
        history.push(norm);
        if moved < 1e-15 {
            break;
        }
    }
    if !(norm <= RESIDUAL_ACCEPT) {
        return Err(BvpError::NotConverged { steps, residual: norm });
    }
    Ok(NewtonRun { y, residual: norm, steps, history })
}

fn unpack(
    p: &Parameters,
    grid: Arc<RadialGrid>,
    regime: FlowRegime,
    y: &[f64],
    coarse: NewtonRun,
    fine: Option<NewtonRun>,
) -> Result<BvpSolution, BvpError> {
    let residual = fine.as_ref().map_or(coarse.residual, |f| f.residual.max(coarse.residual));
    let steps = coarse.steps;
    let history = coarse.history;
    let refined_steps = fine.as_ref().map(|f| f.steps);
    let nf = p.nf();
    let nodes = grid.nodes();
    let col = |c: usize| -> Vec<f64> { y.chunks(STATES).map(|v| v[c]).collect() };
    let eps = y[EPS];
    let m = PointModel::new(p, eps)?;
    let zeta = y
        .chunks(STATES)
        .zip(nodes)
        .map(|(v, &r)| m.zeta(r, v[ETA], v[CHI], v[Z]))
        .collect::<Result<Vec<_>, _>>()?;
    let state = IterationState {
        eta: SampledField::new(grid.clone(), col(ETA), nf - 2.0)?,
        chi: SampledField::new(grid.clone(), col(CHI), nf - 2.0)?,
        zeta: SampledField::new(grid.clone(), zeta, nf - 1.0)?,
        alpha: y[ALPHA],
        epsilon: eps,
        m: steps,
        increment_norms: history.clone(),
    };
    let solution = StationarySolution {
        state,
        regime,
        params: p.clone(),
        converged: true,
        termination: Termination::Converged,
        iterations: steps,
        final_increment: residual,
        contraction_ratios: Vec::new(),
        fixed_point_residual: residual,
        smallness: smallness_check(p),
    };
    Ok(BvpSolution {
        solution,
        z: SampledField::new(grid.clone(), col(Z), 3.0 * nf - 4.0)?,
        w: SampledField::new(grid, col(W), nf)?,
        residual,
        newton_steps: steps,
        refined_steps,
        residual_history: history,
    })
}

/// Differences between two solutions on the same grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonReport {
    pub weight: f64,
    /// `sup r^l |Δη|`
    pub eta_weighted: f64,
    /// `sup r^l |Δχ|`
    pub chi_weighted: f64,
    pub eta_sup: f64,
    pub chi_sup: f64,
    /// Radius where `r^l(|Δη| + |Δχ|)` is largest.
    pub worst_radius: f64,
    pub alpha_relative: f64,
    pub epsilon_relative: f64,
}

impl ComparisonReport {
    pub fn weighted(&self) -> f64 {
        self.eta_weighted.max(self.chi_weighted)
    }
}

pub fn compare_solutions(a: &StationarySolution, b: &StationarySolution, l: f64) -> Result<ComparisonReport, GridError> {
    let (sa, sb) = (&a.state, &b.state);
    sa.eta.check_same_grid(&sb.eta)?;
    let grid = sa.grid();
    let d_eta: Vec<f64> = sa.eta.values().iter().zip(sb.eta.values()).map(|(x, y)| x - y).collect();
    let d_chi: Vec<f64> = sa.chi.values().iter().zip(sb.chi.values()).map(|(x, y)| x - y).collect();
    let mut worst = (0.0, 1.0);
    for (i, &r) in grid.nodes().iter().enumerate() {
        let v = math::powf(r, l) * (math::abs(d_eta[i]) + math::abs(d_chi[i]));
        if v > worst.0 {
            worst = (v, r);
        }
    }
    let rel = |x: f64, y: f64| {
        let s = math::abs(x).max(math::abs(y));
        if s == 0.0 {
            0.0
        } else {
            math::abs(x - y) / s
        }
    };
    Ok(ComparisonReport {
        weight: l,
        eta_weighted: sup_weighted(grid, &d_eta, l),
        chi_weighted: sup_weighted(grid, &d_chi, l),
        eta_sup: max_norm(&d_eta),
        chi_sup: max_norm(&d_chi),
        worst_radius: worst.1,
        alpha_relative: rel(sa.alpha, sb.alpha),
        epsilon_relative: rel(sa.epsilon, sb.epsilon),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_parameters, RawParameters};

    #[test]
    fn rhs_at_zero_state() {
        let p = build_parameters(&RawParameters::reference()).unwrap();
        let s = AugmentedState { eta: 0.0, chi: 0.0, z: 0.0, w: 0.0 };
        let unk = BvpUnknowns { alpha: 0.0, eta_at_1: 0.0 };
        let eps = unk.epsilon(&p);
        for r in [1.0, 3.0, 50.0] {
            let d = augmented_rhs(r, &s, &unk, &p).unwrap();
            let eta_r = eps * p.v_plus / (2.0 * p.mu * r * r);
            assert!((d.eta_r - eta_r).abs() <= 1e-14 * eta_r);
            assert_eq!(d.z_r, 0.0);
            // η = 0 but η_r ≠ 0, so the shear part of Φ survives alongside
            // the 2ε²νn(n−1)v_+²/r^(n+1) term.
            let w_r = -2.0 * eps * eps * p.nu * (6.0 * p.v_plus * p.v_plus / r.powi(4) - 4.0 * p.v_plus * eta_r / r.powi(3));
            assert!((d.w_r - w_r).abs() <= 1e-14 * w_r.abs(), "r={r}: {} vs {w_r}", d.w_r);
            let chi_r = (eps.powi(3) * p.v_plus.powi(2) / 2.0) / (p.kappa * r.powi(6))
                - eps * eps * p.mu * p.v_plus * eta_r / (p.kappa * r.powi(4));
            assert!((d.chi_r - chi_r).abs() <= 1e-14 * chi_r.abs());
        }
    }
}
