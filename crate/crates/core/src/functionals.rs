//! The nonlinear functionals of the reformulated stationary problem.
//!
//! Unknowns are deviations from the far field: `η = v − v_+` (specific
//! volume) and `χ = θ − θ_+` (temperature), with `ζ = η_r`. The momentum
//! balance, integrated once from infinity, reads
//!
//! ```text
//! η_r + A r^(n−1) η = B r^(n−1) χ + F(η, χ),   A = Rθ_+/(εμv_+²),  B = R/(εμv_+)
//! ```
//!
//! and the energy balance, integrated once, gives `χ = α/(κ(n−2)r^(n−2)) + H`.
//!
//! Every formula is written once as a pointwise function on [`PointModel`];
//! the fixed-point solver applies it node by node to whole fields, and the
//! boundary-value solver calls it inside its finite-difference residual.
//! Sharing the code keeps the two solvers consistent in their formulas while
//! leaving their discretizations independent.
//!
//! Each integrand is split into terms with a known algebraic decay rate so
//! that the part of an integral beyond the outer radius can be closed
//! analytically, term by term.

use alloc::vec::Vec;
use core::fmt;

use crate::grid::{GridError, SampledField};
use crate::math;
use crate::model::Parameters;
use crate::quadrature::{self, QuadError};

#[derive(Clone, Debug, PartialEq)]
pub enum FunctionalError {
    /// `v_+ + η ≤ 0` at the given radius.
    SpecificVolumeCollapse { r: f64 },
    /// `θ_+ + χ ≤ 0` at the given radius.
    TemperatureCollapse { r: f64 },
    ZeroMassFlux,
    Grid(GridError),
    Quadrature(QuadError),
}

impl fmt::Display for FunctionalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionalError::SpecificVolumeCollapse { r } => write!(f, "specific volume collapse at r = {r}"),
            FunctionalError::TemperatureCollapse { r } => write!(f, "temperature collapse at r = {r}"),
            FunctionalError::ZeroMassFlux => write!(f, "mass flux must be nonzero"),
            FunctionalError::Grid(e) => write!(f, "{e}"),
            FunctionalError::Quadrature(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for FunctionalError {}

impl From<GridError> for FunctionalError {
    fn from(e: GridError) -> Self {
        FunctionalError::Grid(e)
    }
}

impl From<QuadError> for FunctionalError {
    fn from(e: QuadError) -> Self {
        FunctionalError::Quadrature(e)
    }
}

/// A term of an integrand together with its algebraic decay exponent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term {
    pub value: f64,
    pub exponent: f64,
}

impl Term {
    fn new(value: f64, exponent: f64) -> Self {
        Term { value, exponent }
    }

    /// `∫_r^∞` of this term continued as a power law from `r`.
    fn tail(self, r: f64) -> f64 {
        // Exponents are fixed by construction and always exceed one.
        self.value * r / (self.exponent - 1.0)
    }
}

/// Pointwise formulas at a fixed mass flux `ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointModel {
    p: Parameters,
    eps: f64,
    c_p: f64,
    a_lin: f64,
    b_lin: f64,
}

impl PointModel {
    pub fn new(p: &Parameters, epsilon: f64) -> Result<Self, FunctionalError> {
        if !(epsilon != 0.0 && epsilon.is_finite()) {
            return Err(FunctionalError::ZeroMassFlux);
        }
        let emu = epsilon * p.mu;
        Ok(PointModel {
            p: p.clone(),
            eps: epsilon,
            c_p: p.c_v + p.r_gas,
            a_lin: p.r_gas * p.theta_plus / (emu * p.v_plus * p.v_plus),
            b_lin: p.r_gas / (emu * p.v_plus),
        })
    }

    pub fn params(&self) -> &Parameters {
        &self.p
    }

    pub fn epsilon(&self) -> f64 {
        self.eps
    }

    /// `(A, B)` of the linear part of the η equation.
    pub fn linear_coefficients(&self) -> (f64, f64) {
        (self.a_lin, self.b_lin)
    }

    fn rn1(&self, r: f64) -> f64 {
        math::powi(r, self.p.n as i32 - 1)
    }

    fn volume(&self, r: f64, eta: f64) -> Result<f64, FunctionalError> {
        let v = self.p.v_plus + eta;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(FunctionalError::SpecificVolumeCollapse { r })
        }
    }

    /// `F(η, χ)(r)`, with `z = ∫_r^∞ η/s^(2n−1) ds` supplied.
    pub fn f(&self, r: f64, eta: f64, chi: f64, z: f64) -> Result<f64, FunctionalError> {
        let p = &self.p;
        let v = self.volume(r, eta)?;
        let rn1 = self.rn1(r);
        let emu = self.eps * p.mu;
        let cross = -p.r_gas * rn1 * chi * eta / (emu * p.v_plus * v);
        let quad = p.r_gas * p.theta_plus * rn1 * eta * eta / (emu * p.v_plus * p.v_plus * v);
        let flux = self.eps * p.v_plus / (2.0 * p.mu * rn1);
        let conv = self.eps * eta / (p.mu * rn1);
        let nonlocal = -self.eps * (p.nf() - 1.0) * rn1 / p.mu * z;
        Ok(cross + quad + flux + conv + nonlocal)
    }

    /// `η_r` from the momentum balance. The pressure deviation is formed
    /// directly as `R(v_+χ − θ_+η)/(v_+(v_++η))`, which equals the linear
    /// part plus the two pressure terms of `F` without their cancellation.
    pub fn zeta(&self, r: f64, eta: f64, chi: f64, z: f64) -> Result<f64, FunctionalError> {
        let p = &self.p;
        let v = self.volume(r, eta)?;
        let rn1 = self.rn1(r);
        let dp = p.r_gas * (p.v_plus * chi - p.theta_plus * eta) / (p.v_plus * v);
        let pressure = rn1 * dp / (self.eps * p.mu);
        let flux = self.eps * p.v_plus / (2.0 * p.mu * rn1);
        let conv = self.eps * eta / (p.mu * rn1);
        let nonlocal = -self.eps * (p.nf() - 1.0) * rn1 / p.mu * z;
        Ok(pressure + flux + conv + nonlocal)
    }

    /// Terms of `Φ(η, ζ)`: the `ζ` term, the `v_+²` part and the remainder
    /// of the `(v_+ + η)²` term.
    pub fn phi_terms(&self, r: f64, eta: f64, zeta: f64) -> [Term; 3] {
        let p = &self.p;
        let nf = p.nf();
        let n = p.n as i32;
        let e2nu = self.eps * self.eps * p.nu;
        let v = p.v_plus + eta;
        let shear = -4.0 * e2nu * (nf - 1.0) * v * zeta / math::powi(r, n);
        let c = 2.0 * e2nu * nf * (nf - 1.0) / math::powi(r, n + 1);
        [
            Term::new(shear, 2.0 * nf - 1.0),
            Term::new(c * p.v_plus * p.v_plus, nf + 1.0),
            Term::new(c * eta * (2.0 * p.v_plus + eta), 2.0 * nf - 1.0),
        ]
    }

    pub fn phi(&self, r: f64, eta: f64, zeta: f64) -> f64 {
        self.phi_terms(r, eta, zeta).iter().map(|t| t.value).sum()
    }

    /// `∫_r^∞ Φ` beyond `r`, closed algebraically.
    pub fn phi_tail(&self, r: f64, eta: f64, zeta: f64) -> f64 {
        self.phi_terms(r, eta, zeta).iter().map(|t| t.tail(r)).sum()
    }

    /// `∫_r^∞ η/s^(2n−1)` beyond `r` for `η ∝ r^(−(n−2))`.
    pub fn z_tail(&self, r: f64, eta: f64) -> f64 {
        let nf = self.p.nf();
        Term::new(eta * math::powi(r, -(2 * self.p.n as i32 - 1)), 3.0 * nf - 3.0).tail(r)
    }

    /// Terms of the integrand `{εc_Pχ + (ε³/2)v²/τ^(2(n−1)) − ε²μvζ/τ^(n−1)
    /// + w}/τ^(n−1)` of `H` (without the `−1/κ` factor), with
    /// `w = ∫_τ^∞ Φ`.
    pub fn h_terms(&self, r: f64, eta: f64, zeta: f64, chi: f64, w: f64) -> [Term; 6] {
        let p = &self.p;
        let nf = p.nf();
        let n = p.n as i32;
        let e = self.eps;
        let rn1 = self.rn1(r);
        let r3 = math::powi(r, 3 * (n - 1));
        let r2 = math::powi(r, 2 * (n - 1));
        let vp = p.v_plus;
        [
            Term::new(e * self.c_p * chi / rn1, 2.0 * nf - 3.0),
            Term::new(0.5 * e * e * e * vp * vp / r3, 3.0 * nf - 3.0),
            Term::new(0.5 * e * e * e * eta * (2.0 * vp + eta) / r3, 4.0 * nf - 5.0),
            Term::new(-e * e * p.mu * vp * zeta / r2, 3.0 * nf - 3.0),
            Term::new(-e * e * p.mu * eta * zeta / r2, 4.0 * nf - 5.0),
            Term::new(w / rn1, 2.0 * nf - 1.0),
        ]
    }

    /// `H(r)` contributed by `τ > r`, closed algebraically.
    pub fn h_tail(&self, r: f64, eta: f64, zeta: f64, chi: f64, w: f64) -> f64 {
        -self.h_terms(r, eta, zeta, chi, w).iter().map(|t| t.tail(r)).sum::<f64>() / self.p.kappa
    }

    /// `χ_r` from the once-integrated energy balance.
    pub fn chi_r(&self, r: f64, eta: f64, zeta: f64, chi: f64, w: f64, alpha: f64) -> f64 {
        let sum: f64 = self.h_terms(r, eta, zeta, chi, w).iter().map(|t| t.value).sum();
        (-alpha / self.rn1(r) + sum) / self.p.kappa
    }
}

/// Admissibility of a state pair: `v_+ + η > 0` and `θ_+ + χ > 0` at every node.
pub fn check_state(eta: &SampledField, chi: &SampledField, p: &Parameters) -> Result<(), FunctionalError> {
    eta.check_same_grid(chi)?;
    for ((&r, &e), &c) in eta.grid().nodes().iter().zip(eta.values()).zip(chi.values()) {
        if !(p.v_plus + e > 0.0) {
            return Err(FunctionalError::SpecificVolumeCollapse { r });
        }
        if !(p.theta_plus + c > 0.0) {
            return Err(FunctionalError::TemperatureCollapse { r });
        }
    }
    Ok(())
}

/// `∫_r^∞ η(s)/s^(2n−1) ds` at every node.
pub fn eta_tail_integral(eta: &SampledField) -> Result<SampledField, FunctionalError> {
    let n = eta.grid().dim();
    Ok(quadrature::cumulative_tail_integrals(eta, 2.0 * f64::from(n) - 1.0)?)
}

/// `F(η, χ)` at every node. `tail_eta` is [`eta_tail_integral`] of `η`.
pub fn f_nonlinearity(
    eta: &SampledField,
    chi: &SampledField,
    tail_eta: &SampledField,
    p: &Parameters,
    epsilon: f64,
) -> Result<SampledField, FunctionalError> {
    eta.check_same_grid(chi)?;
    eta.check_same_grid(tail_eta)?;
    let m = PointModel::new(p, epsilon)?;
    let nodes = eta.grid().nodes();
    let values = (0..nodes.len())
        .map(|i| m.f(nodes[i], eta.values()[i], chi.values()[i], tail_eta.values()[i]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SampledField::new(eta.grid().clone(), values, p.nf() - 3.0)?)
}

/// `ζ = η_r` from the momentum balance at every node.
pub fn zeta_balance(
    eta: &SampledField,
    chi: &SampledField,
    tail_eta: &SampledField,
    p: &Parameters,
    epsilon: f64,
) -> Result<SampledField, FunctionalError> {
    eta.check_same_grid(chi)?;
    eta.check_same_grid(tail_eta)?;
    let m = PointModel::new(p, epsilon)?;
    let nodes = eta.grid().nodes();
    let values = (0..nodes.len())
        .map(|i| m.zeta(nodes[i], eta.values()[i], chi.values()[i], tail_eta.values()[i]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SampledField::new(eta.grid().clone(), values, p.nf() - 1.0)?)
}

/// `Φ(η, ζ)` at every node.
pub fn phi_dissipation(
    eta: &SampledField,
    zeta: &SampledField,
    p: &Parameters,
    epsilon: f64,
) -> Result<SampledField, FunctionalError> {
    eta.check_same_grid(zeta)?;
    let nodes = eta.grid().nodes();
    if epsilon == 0.0 {
        return Ok(SampledField::zeros(eta.grid().clone(), p.nf() + 1.0));
    }
    let m = PointModel::new(p, epsilon)?;
    let values = (0..nodes.len()).map(|i| m.phi(nodes[i], eta.values()[i], zeta.values()[i])).collect();
    Ok(SampledField::new(eta.grid().clone(), values, p.nf() + 1.0)?)
}

/// Sum of term-wise backward cumulative integrals, each closed with its
/// own algebraic tail.
fn cumulative_terms<const K: usize>(eta: &SampledField, terms: &[[Term; K]]) -> Vec<f64> {
    let grid = eta.grid();
    let r_max = grid.r_max();
    let mut total = alloc::vec![0.0; grid.len()];
    let last = terms.len() - 1;
    for k in 0..K {
        let values: Vec<f64> = terms.iter().map(|t| t[k].value).collect();
        let tail = terms[last][k].tail(r_max);
        let part = quadrature::cumulative_from_values(grid, &values, tail);
        for (acc, x) in total.iter_mut().zip(part) {
            *acc += x;
        }
    }
    total
}

/// `H` together with the inner dissipation integral `w = ∫_r^∞ Φ` it uses.
#[derive(Clone, Debug)]
pub struct HEvaluation {
    pub h: SampledField,
    pub w: SampledField,
}

/// `H(η, ζ, χ)` at every node by two backward sweeps: first `w = ∫_τ^∞ Φ`,
/// then the outer `τ` integral.
pub fn h_functional(
    eta: &SampledField,
    zeta: &SampledField,
    chi: &SampledField,
    p: &Parameters,
    epsilon: f64,
) -> Result<HEvaluation, FunctionalError> {
    eta.check_same_grid(zeta)?;
    eta.check_same_grid(chi)?;
    let grid = eta.grid();
    let nf = p.nf();
    if epsilon == 0.0 {
        return Ok(HEvaluation {
            h: SampledField::zeros(grid.clone(), 2.0 * nf - 4.0),
            w: SampledField::zeros(grid.clone(), nf),
        });
    }
    if !(eta.tail_valid && zeta.tail_valid && chi.tail_valid) {
        return Err(QuadError::TailUnavailable.into());
    }
    let m = PointModel::new(p, epsilon)?;
    let nodes = grid.nodes();
    let (e, z, c) = (eta.values(), zeta.values(), chi.values());

    let phi_terms: Vec<[Term; 3]> = (0..nodes.len()).map(|i| m.phi_terms(nodes[i], e[i], z[i])).collect();
    let w = cumulative_terms(eta, &phi_terms);

    let h_terms: Vec<[Term; 6]> = (0..nodes.len()).map(|i| m.h_terms(nodes[i], e[i], z[i], c[i], w[i])).collect();
    let h: Vec<f64> = cumulative_terms(eta, &h_terms).into_iter().map(|x| -x / p.kappa).collect();

    Ok(HEvaluation {
        h: SampledField::new(grid.clone(), h, 2.0 * nf - 4.0)?,
        w: SampledField::new(grid.clone(), w, nf)?,
    })
}
