//! Physical parameters, derived constants and flow-regime classification.
//!
//! All radii are normalized so that the sphere has radius one. A raw record
//! that states a physical sphere radius `r0` is rescaled when it is
//! validated: lengths are measured in units of `r0`, which divides the
//! viscosities and the heat conductivity by `r0` and leaves velocities,
//! densities and temperatures unchanged.

use core::fmt;

/// Unvalidated input record, as read from a configuration file.
#[derive(Clone, Debug, PartialEq)]
pub struct RawParameters {
    pub n: i64,
    pub r_gas: f64,
    pub c_v: f64,
    pub nu: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub v_plus: f64,
    pub theta_plus: f64,
    pub u_minus: f64,
    /// Boundary specific-volume deviation `v_- - v_+`; only used (and then
    /// required) for inflow.
    pub eta_minus: Option<f64>,
    pub chi_minus: f64,
    /// Far-field velocity. Anything other than zero is rejected.
    pub u_plus: Option<f64>,
    /// Physical radius of the sphere; defaults to one.
    pub r0: Option<f64>,
}

impl RawParameters {
    /// The reference configuration used throughout the tests and docs:
    /// `n = 3`, `R = 1`, `c_V = 1.5`, `nu = 0.5`, `lambda = 0`, `kappa = 1`,
    /// `v_+ = theta_+ = 1` and boundary data of size `1e-3`.
    pub fn reference() -> Self {
        RawParameters {
            n: 3,
            r_gas: 1.0,
            c_v: 1.5,
            nu: 0.5,
            lambda: 0.0,
            kappa: 1.0,
            v_plus: 1.0,
            theta_plus: 1.0,
            u_minus: 1e-3,
            eta_minus: Some(1e-3),
            chi_minus: 1e-3,
            u_plus: None,
            r0: None,
        }
    }
}

/// Why a raw record was rejected.
#[derive(Clone, Debug, PartialEq)]
pub enum ParamError {
    NonFinite(&'static str),
    DimensionTooLow { n: i64 },
    NotPositive(&'static str),
    ShearViscosity { nu: f64 },
    ViscosityCondition { value: f64 },
    CombinedViscosity { mu: f64 },
    ViscosityRatio { ratio: f64, bound: f64 },
    FarFieldVelocity { u_plus: f64 },
    MissingField(&'static str),
    BoundaryVolume { v_minus: f64 },
    BoundaryTemperature { theta_minus: f64 },
}

impl fmt::Display for ParamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamError::NonFinite(name) => write!(f, "field `{name}` is not finite"),
            ParamError::DimensionTooLow { n } => write!(f, "n ≥ 3 required (got n = {n})"),
            ParamError::NotPositive(name) => write!(f, "field `{name}` must be strictly positive"),
            ParamError::ShearViscosity { nu } => write!(f, "ν > 0 violated (ν = {nu})"),
            ParamError::ViscosityCondition { value } => {
                write!(f, "2ν + nλ ≥ 0 violated (2ν + nλ = {value})")
            }
            ParamError::CombinedViscosity { mu } => write!(f, "μ = 2ν + λ > 0 violated (μ = {mu})"),
            ParamError::ViscosityRatio { ratio, bound } => {
                write!(f, "ν/μ ≤ n/(2(n−1)) violated ({ratio} > {bound})")
            }
            ParamError::FarFieldVelocity { u_plus } => write!(
                f,
                "far-field velocity must vanish (u_+ = 0 is necessary for stationary \
                 solutions in n ≥ 2 dimensions), got u_plus = {u_plus}"
            ),
            ParamError::MissingField(name) => write!(f, "missing field `{name}`"),
            ParamError::BoundaryVolume { v_minus } => {
                write!(f, "boundary specific volume v_- = v_+ + η_- must be positive (got {v_minus})")
            }
            ParamError::BoundaryTemperature { theta_minus } => write!(
                f,
                "boundary temperature θ_- = θ_+ + χ_- must be positive (got {theta_minus})"
            ),
        }
    }
}

impl core::error::Error for ParamError {}

/// Validated physical constants and boundary data (sphere radius one).
#[derive(Clone, Debug, PartialEq)]
#[non_exhaustive]
pub struct Parameters {
    pub n: u32,
    pub r_gas: f64,
    pub c_v: f64,
    pub nu: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub v_plus: f64,
    pub theta_plus: f64,
    pub u_minus: f64,
    /// Zero unless the regime is inflow.
    pub eta_minus: f64,
    pub chi_minus: f64,
    /// `2ν + λ`, computed once at validation.
    pub mu: f64,
}

fn finite(name: &'static str, x: f64) -> Result<f64, ParamError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(ParamError::NonFinite(name))
    }
}

fn positive(name: &'static str, x: f64) -> Result<f64, ParamError> {
    if finite(name, x)? > 0.0 {
        Ok(x)
    } else {
        Err(ParamError::NotPositive(name))
    }
}

/// Validate a raw record.
pub fn build_parameters(raw: &RawParameters) -> Result<Parameters, ParamError> {
    if raw.n < 3 {
        return Err(ParamError::DimensionTooLow { n: raw.n });
    }
    let n = u32::try_from(raw.n).map_err(|_| ParamError::DimensionTooLow { n: raw.n })?;
    let r0 = positive("r0", raw.r0.unwrap_or(1.0))?;
    let r_gas = positive("r_gas", raw.r_gas)?;
    let c_v = positive("c_v", raw.c_v)?;
    let kappa = positive("kappa", raw.kappa)? / r0;
    let v_plus = positive("v_plus", raw.v_plus)?;
    let theta_plus = positive("theta_plus", raw.theta_plus)?;
    let nu = finite("nu", raw.nu)? / r0;
    let lambda = finite("lambda", raw.lambda)? / r0;
    let u_minus = finite("u_minus", raw.u_minus)?;
    let chi_minus = finite("chi_minus", raw.chi_minus)?;

    if let Some(u_plus) = raw.u_plus {
        if u_plus != 0.0 {
            return Err(ParamError::FarFieldVelocity { u_plus });
        }
    }
    if nu <= 0.0 {
        return Err(ParamError::ShearViscosity { nu });
    }
    let bulk = 2.0 * nu + f64::from(n) * lambda;
    if bulk < 0.0 {
        return Err(ParamError::ViscosityCondition { value: bulk });
    }
    let mu = 2.0 * nu + lambda;
    if mu <= 0.0 {
        return Err(ParamError::CombinedViscosity { mu });
    }
    // Implied by the two conditions above; checked with a rounding allowance.
    let bound = f64::from(n) / (2.0 * f64::from(n - 1));
    if nu / mu > bound * (1.0 + 1e-12) {
        return Err(ParamError::ViscosityRatio { ratio: nu / mu, bound });
    }

    let theta_minus = theta_plus + chi_minus;
    if theta_minus <= 0.0 {
        return Err(ParamError::BoundaryTemperature { theta_minus });
    }

    let eta_minus = if u_minus > 0.0 {
        let eta = finite("eta_minus", raw.eta_minus.ok_or(ParamError::MissingField("eta_minus"))?)?;
        let v_minus = v_plus + eta;
        if v_minus <= 0.0 {
            return Err(ParamError::BoundaryVolume { v_minus });
        }
        eta
    } else {
        0.0
    };

    Ok(Parameters {
        n,
        r_gas,
        c_v,
        nu,
        lambda,
        kappa,
        v_plus,
        theta_plus,
        u_minus,
        eta_minus,
        chi_minus,
        mu,
    })
}

impl Parameters {
    pub fn nf(&self) -> f64 {
        f64::from(self.n)
    }

    pub fn rho_plus(&self) -> f64 {
        1.0 / self.v_plus
    }

    pub fn theta_minus(&self) -> f64 {
        self.theta_plus + self.chi_minus
    }

    /// `v_- = v_+ + η_-` (inflow boundary specific volume).
    pub fn v_minus(&self) -> f64 {
        self.v_plus + self.eta_minus
    }

    /// A copy with different boundary data, revalidated.
    pub fn with_boundary(&self, u_minus: f64, eta_minus: f64, chi_minus: f64) -> Result<Self, ParamError> {
        let mut raw = self.to_raw();
        raw.u_minus = u_minus;
        raw.eta_minus = Some(eta_minus);
        raw.chi_minus = chi_minus;
        build_parameters(&raw)
    }

    /// A copy with different viscosities, revalidated.
    pub fn with_viscosity(&self, nu: f64, lambda: f64) -> Result<Self, ParamError> {
        let mut raw = self.to_raw();
        raw.nu = nu;
        raw.lambda = lambda;
        build_parameters(&raw)
    }

    /// The normalized raw record this set would be rebuilt from.
    pub fn to_raw(&self) -> RawParameters {
        RawParameters {
            n: i64::from(self.n),
            r_gas: self.r_gas,
            c_v: self.c_v,
            nu: self.nu,
            lambda: self.lambda,
            kappa: self.kappa,
            v_plus: self.v_plus,
            theta_plus: self.theta_plus,
            u_minus: self.u_minus,
            eta_minus: Some(self.eta_minus),
            chi_minus: self.chi_minus,
            u_plus: None,
            r0: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FlowRegime {
    Inflow,
    Impermeable,
    Outflow,
}

impl FlowRegime {
    pub fn name(self) -> &'static str {
        match self {
            FlowRegime::Inflow => "inflow",
            FlowRegime::Impermeable => "impermeable",
            FlowRegime::Outflow => "outflow",
        }
    }
}

pub fn classify_regime(p: &Parameters) -> FlowRegime {
    if p.u_minus > 0.0 {
        FlowRegime::Inflow
    } else if p.u_minus < 0.0 {
        FlowRegime::Outflow
    } else {
        FlowRegime::Impermeable
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DerivedConstants {
    pub mu: f64,
    pub c_p: f64,
    /// `Rθ_+ / (v_+² n)`, the inflow kernel constant.
    pub omega: f64,
    /// `Rθ_+ / (v_+ n)`, the outflow kernel constant.
    pub omega_bar: f64,
    /// Mass flux `u_-/v_-`; only known up front for inflow. For outflow it
    /// depends on the unknown boundary specific volume.
    pub epsilon_inflow: Option<f64>,
}

pub fn derive_constants(p: &Parameters) -> DerivedConstants {
    let nf = p.nf();
    let omega = p.r_gas * p.theta_plus / (p.v_plus * p.v_plus * nf);
    let omega_bar = p.r_gas * p.theta_plus / (p.v_plus * nf);
    let epsilon_inflow = match classify_regime(p) {
        FlowRegime::Inflow => Some(p.u_minus / p.v_minus()),
        _ => None,
    };
    DerivedConstants {
        mu: p.mu,
        c_p: p.r_gas + p.c_v,
        omega,
        omega_bar,
        epsilon_inflow,
    }
}

impl DerivedConstants {
    /// Inflow kernel decay coefficient `ω/(με)`.
    pub fn inflow_decay(&self, epsilon: f64) -> f64 {
        self.omega / (self.mu * epsilon)
    }

    /// Outflow kernel decay coefficient `ω̄/(|u_-|μ)`.
    pub fn outflow_decay(&self, u_minus: f64) -> f64 {
        self.omega_bar / (libm::fabs(u_minus) * self.mu)
    }

    /// Width `μ ε / (n ω)` of the layer in which the kernel decays by `1/e`
    /// next to the sphere.
    pub fn layer_width(&self, n: u32, epsilon_scale: f64) -> f64 {
        self.mu * epsilon_scale / (f64::from(n) * self.omega)
    }
}

/// Smallness hypotheses of the existence theory, evaluated on the data.
/// Each margin is the ratio of a quantity to its bound (≤ 1 means satisfied).
#[derive(Clone, Debug, PartialEq)]
pub struct SmallnessReport {
    /// `|η_-| ≤ v_+/2`
    pub eta_bound_ok: bool,
    pub eta_margin: f64,
    /// `u_- ≤ nωv_+ / (2(n−2)μ)`
    pub speed_bound_ok: bool,
    pub speed_margin: f64,
    /// `|u_-| ≤ 1`
    pub unit_speed_ok: bool,
    pub unit_speed_margin: f64,
    /// `|u_-| + |η_-| + |χ_-|`
    pub data_size: f64,
}

impl SmallnessReport {
    pub fn within_proven_regime(&self) -> bool {
        self.eta_bound_ok && self.speed_bound_ok && self.unit_speed_ok
    }

    pub fn stamp(&self) -> &'static str {
        if self.within_proven_regime() {
            "within proven smallness regime"
        } else {
            "outside proven smallness regime"
        }
    }
}

pub fn smallness_check(p: &Parameters) -> SmallnessReport {
    let d = derive_constants(p);
    let nf = p.nf();
    let eta_margin = libm::fabs(p.eta_minus) / (p.v_plus / 2.0);
    let speed_bound = nf * d.omega * p.v_plus / (2.0 * (nf - 2.0) * p.mu);
    let speed_margin = p.u_minus / speed_bound;
    let unit_speed_margin = libm::fabs(p.u_minus);
    SmallnessReport {
        eta_bound_ok: eta_margin <= 1.0,
        eta_margin,
        speed_bound_ok: speed_margin <= 1.0,
        speed_margin,
        unit_speed_ok: unit_speed_margin <= 1.0,
        unit_speed_margin,
        data_size: libm::fabs(p.u_minus) + libm::fabs(p.eta_minus) + libm::fabs(p.chi_minus),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn raw() -> RawParameters {
        RawParameters::reference()
    }

    #[test]
    fn reference_record_is_valid() {
        let p = build_parameters(&raw()).unwrap();
        assert_eq!(p.mu, 1.0);
        assert_eq!(p.n, 3);
    }

    #[test]
    fn negative_bulk_condition_is_rejected() {
        let mut r = raw();
        r.lambda = -1.0;
        let err = build_parameters(&r).unwrap_err();
        assert!(matches!(err, ParamError::ViscosityCondition { .. }));
        assert!(err.to_string().contains("2ν + nλ ≥ 0 violated"));
    }

    #[test]
    fn two_dimensions_are_rejected() {
        let mut r = raw();
        r.n = 2;
        let err = build_parameters(&r).unwrap_err();
        assert!(err.to_string().contains("n ≥ 3 required"));
    }

    #[test]
    fn nonzero_far_field_velocity_is_rejected() {
        let mut r = raw();
        r.u_plus = Some(0.1);
        assert!(matches!(build_parameters(&r), Err(ParamError::FarFieldVelocity { .. })));
        r.u_plus = Some(0.0);
        assert!(build_parameters(&r).is_ok());
    }

    #[test]
    fn inflow_requires_boundary_volume() {
        let mut r = raw();
        r.eta_minus = None;
        assert_eq!(build_parameters(&r), Err(ParamError::MissingField("eta_minus")));
        r.u_minus = -1e-3;
        assert!(build_parameters(&r).is_ok());
    }

    #[test]
    fn physical_radius_rescales_transport_coefficients() {
        let mut r = raw();
        r.r0 = Some(2.0);
        let p = build_parameters(&r).unwrap();
        assert_eq!(p.nu, 0.25);
        assert_eq!(p.kappa, 0.5);
        assert_eq!(p.mu, 0.5);
    }

    #[test]
    fn regimes_follow_sign_of_boundary_velocity() {
        let p = build_parameters(&raw()).unwrap();
        assert_eq!(classify_regime(&p), FlowRegime::Inflow);
        let mut r = raw();
        r.u_minus = 0.0;
        assert_eq!(classify_regime(&build_parameters(&r).unwrap()), FlowRegime::Impermeable);
        r.u_minus = -1e-3;
        assert_eq!(classify_regime(&build_parameters(&r).unwrap()), FlowRegime::Outflow);
    }

    #[test]
    fn derived_constants_examples() {
        let p = build_parameters(&raw()).unwrap();
        let d = derive_constants(&p);
        assert!((d.omega - 1.0 / 3.0).abs() < 1e-16);
        assert!((d.omega_bar - 1.0 / 3.0).abs() < 1e-16);
        assert_eq!(d.c_p, 2.5);

        let mut r = raw();
        r.n = 4;
        r.theta_plus = 2.0;
        r.v_plus = 2.0;
        let d = derive_constants(&build_parameters(&r).unwrap());
        assert_eq!(d.omega, 0.125);
        assert_eq!(d.omega_bar, 0.25);

        let mut r = raw();
        r.eta_minus = Some(0.0);
        let d = derive_constants(&build_parameters(&r).unwrap());
        assert_eq!(d.epsilon_inflow, Some(1e-3));

        r.u_minus = -1e-3;
        assert_eq!(derive_constants(&build_parameters(&r).unwrap()).epsilon_inflow, None);
    }

    #[test]
    fn derive_constants_is_deterministic() {
        let p = build_parameters(&raw()).unwrap();
        let a = derive_constants(&p);
        let b = derive_constants(&p);
        assert_eq!(a.omega.to_bits(), b.omega.to_bits());
        assert_eq!(a.omega_bar.to_bits(), b.omega_bar.to_bits());
        assert_eq!(a, b);
    }

    #[test]
    fn smallness_examples() {
        let mut r = raw();
        r.eta_minus = Some(0.4);
        let s = smallness_check(&build_parameters(&r).unwrap());
        assert!(s.eta_bound_ok);
        assert!((s.eta_margin - 0.8).abs() < 1e-15);

        let mut r = raw();
        r.u_minus = 0.2;
        let s = smallness_check(&build_parameters(&r).unwrap());
        assert!(s.speed_bound_ok);
        assert!((s.speed_margin - 0.4).abs() < 1e-15);

        let mut r = raw();
        r.u_minus = 1.5;
        let s = smallness_check(&build_parameters(&r).unwrap());
        assert!(!s.unit_speed_ok);
        assert_eq!(s.stamp(), "outside proven smallness regime");
    }

    proptest! {
        #[test]
        fn viscosity_ratio_holds_for_admissible_draws(
            n in 3i64..8,
            nu in 1e-3f64..10.0,
            frac in 0.0f64..1.0,
            extra in 0.0f64..5.0,
        ) {
            // λ ranges from the bulk-condition boundary -2ν/n upwards.
            let lambda = -2.0 * nu / n as f64 * frac + extra * frac;
            let mut r = raw();
            r.n = n;
            r.nu = nu;
            r.lambda = lambda;
            let p = build_parameters(&r).unwrap();
            let bound = n as f64 / (2.0 * (n as f64 - 1.0));
            prop_assert!(p.nu / p.mu <= bound * (1.0 + 1e-12));
            // classification is total over valid configurations
            let _ = classify_regime(&p);
        }
    }
}
